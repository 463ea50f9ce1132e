#include "texteffect/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "json.hpp"
#include "texteffect/error.hpp"

namespace tfx {

PropensityBins propensity_bins(std::span<const double> e, double lo, double hi) {
    if (e.empty()) fail(errc::empty_input, "propensity_bins: empty input");
    if (!(0.0 < lo && lo < hi && hi < 1.0))
        fail(errc::config_error, "bins must satisfy 0 < lo < hi < 1");
    PropensityBins bins;
    bins.lo = lo;
    bins.hi = hi;
    long n_low = 0, n_mid = 0, n_high = 0;
    for (double v : e) {
        if (!(v >= 0.0 && v <= 1.0))
            fail(errc::invariant_violation,
                 "propensity value " + std::to_string(v) + " outside [0,1]");
        if (v <= lo) ++n_low;
        else if (v >= hi) ++n_high;
        else ++n_mid;
    }
    const double n = static_cast<double>(e.size());
    bins.p_low = n_low / n;
    bins.p_mid = n_mid / n;
    bins.p_high = n_high / n;
    return bins;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

BenchmarkReport build_report(const std::map<std::string, Band>& bands, long n_replicas,
                             const std::vector<EstimateRecord>& estimates) {
    if (n_replicas < 1) fail(errc::config_error, "build_report: n_replicas must be >= 1");

    BenchmarkReport report;
    report.n_replicas = n_replicas;

    std::set<std::string> estimator_set, outcome_set;
    for (const EstimateRecord& rec : estimates) {
        estimator_set.insert(rec.estimator);
        outcome_set.insert(rec.outcome);
    }
    report.estimators.assign(estimator_set.begin(), estimator_set.end());
    report.outcomes.assign(outcome_set.begin(), outcome_set.end());

    std::map<std::pair<std::string, std::string>, std::vector<std::optional<double>>> grid;
    std::map<std::pair<std::string, std::string>, std::vector<PropensityBins>> bin_acc;
    for (const EstimateRecord& rec : estimates) {
        if (rec.replica < 0 || rec.replica >= n_replicas)
            fail(errc::config_error, "estimate for replica " + std::to_string(rec.replica) +
                                         " outside [0, " + std::to_string(n_replicas) + ")");
        auto& slot = grid[{rec.estimator, rec.outcome}];
        slot.resize(n_replicas);
        if (slot[rec.replica].has_value())
            fail(errc::duplicate_id, "duplicate estimate for (" + rec.estimator + ", " +
                                         rec.outcome + ", replica " +
                                         std::to_string(rec.replica) + ")");
        slot[rec.replica] = rec.point;
        if (rec.bins) bin_acc[{rec.estimator, rec.outcome}].push_back(*rec.bins);
    }

    for (const auto& [key, slot] : grid) {
        const auto band_it = bands.find(key.second);
        if (band_it == bands.end())
            fail(errc::missing_estimate,
                 "no ground-truth band for outcome '" + key.second + "'");
        ReportCell cell;
        cell.band = band_it->second;
        cell.estimates.reserve(n_replicas);
        long inside = 0;
        for (long r = 0; r < n_replicas; ++r) {
            if (!slot[r].has_value())
                fail(errc::missing_estimate, "missing estimate for (" + key.first + ", " +
                                                 key.second + ", replica " + std::to_string(r) +
                                                 ")");
            const double v = *slot[r];
            cell.estimates.push_back(v);
            if (v >= cell.band.lo && v <= cell.band.hi) ++inside;
        }
        cell.coverage = static_cast<double>(inside) / static_cast<double>(n_replicas);
        const auto bit = bin_acc.find(key);
        if (bit != bin_acc.end() && !bit->second.empty()) {
            PropensityBins mean;
            mean.lo = bit->second.front().lo;
            mean.hi = bit->second.front().hi;
            for (const PropensityBins& b : bit->second) {
                mean.p_low += b.p_low;
                mean.p_mid += b.p_mid;
                mean.p_high += b.p_high;
            }
            const double m = static_cast<double>(bit->second.size());
            mean.p_low /= m;
            mean.p_mid /= m;
            mean.p_high /= m;
            cell.bins = mean;
        }
        report.cells.emplace(key, std::move(cell));
    }
    return report;
}

std::string BenchmarkReport::to_json() const {
    nlohmann::json j;
    j["n_replicas"] = n_replicas;
    j["estimators"] = estimators;
    j["outcomes"] = outcomes;
    nlohmann::json cells_json = nlohmann::json::array();
    for (const auto& [key, cell] : cells) {
        nlohmann::json c;
        c["estimator"] = key.first;
        c["outcome"] = key.second;
        c["band_lo"] = cell.band.lo;
        c["band_hi"] = cell.band.hi;
        c["coverage"] = cell.coverage;
        c["estimates"] = cell.estimates;
        if (cell.bins) {
            c["propensity_bins"] = {{"p_low", cell.bins->p_low},
                                    {"p_mid", cell.bins->p_mid},
                                    {"p_high", cell.bins->p_high},
                                    {"lo", cell.bins->lo},
                                    {"hi", cell.bins->hi}};
        }
        cells_json.push_back(std::move(c));
    }
    j["cells"] = std::move(cells_json);
    return j.dump(2);
}

std::string BenchmarkReport::to_csv() const {
    std::string out = "estimator,outcome,replica,estimate,band_lo,band_hi\n";
    for (const auto& [key, cell] : cells) {
        for (std::size_t r = 0; r < cell.estimates.size(); ++r) {
            out += key.first;
            out += ',';
            out += key.second;
            out += ',';
            out += std::to_string(r);
            out += ',';
            out += fmt(cell.estimates[r]);
            out += ',';
            out += fmt(cell.band.lo);
            out += ',';
            out += fmt(cell.band.hi);
            out += '\n';
        }
    }
    return out;
}

std::string BenchmarkReport::bins_csv() const {
    std::string out = "estimator,outcome,p_low,p_mid,p_high\n";
    for (const auto& [key, cell] : cells) {
        if (!cell.bins) continue;
        out += key.first;
        out += ',';
        out += key.second;
        out += ',';
        out += fmt(cell.bins->p_low);
        out += ',';
        out += fmt(cell.bins->p_mid);
        out += ',';
        out += fmt(cell.bins->p_high);
        out += '\n';
    }
    return out;
}

}  // namespace tfx
