#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "texteffect/sim.hpp"

namespace tfx {

// Overlap summary: shares of propensities in [0,lo], (lo,hi), [hi,1].
// Boundary values fall in the outer bins.
struct PropensityBins {
    double p_low = 0.0;
    double p_mid = 0.0;
    double p_high = 0.0;
    double lo = 0.1;
    double hi = 0.9;
};

PropensityBins propensity_bins(std::span<const double> e, double lo = 0.1, double hi = 0.9);

struct EstimateRecord {
    int replica = 0;
    std::string estimator;
    std::string outcome;
    double point = 0.0;
    std::optional<PropensityBins> bins;
};

struct ReportCell {
    std::vector<double> estimates;  // indexed by replica
    Band band;
    double coverage = 0.0;  // share of replicas inside [band.lo, band.hi]
    std::optional<PropensityBins> bins;  // mean over replicas, where applicable
};

struct BenchmarkReport {
    long n_replicas = 0;
    std::vector<std::string> estimators;  // sorted
    std::vector<std::string> outcomes;    // sorted
    std::map<std::pair<std::string, std::string>, ReportCell> cells;  // (estimator, outcome)

    std::string to_json() const;
    std::string to_csv() const;   // estimator,outcome,replica,estimate,band_lo,band_hi
    std::string bins_csv() const;  // estimator,outcome,p_low,p_mid,p_high
};

// Aggregate replica estimates against ground-truth bands. Every estimator is
// required to report a value for every (outcome, replica) it appears in;
// a hole fails with missing_estimate naming it.
BenchmarkReport build_report(const std::map<std::string, Band>& bands, long n_replicas,
                             const std::vector<EstimateRecord>& estimates);

}  // namespace tfx
