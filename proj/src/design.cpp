#include "texteffect/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>

#include "texteffect/error.hpp"
#include "texteffect/rng.hpp"

namespace tfx {

namespace {

// |stat*| >= |stat| with a small cushion so exact ties (e.g. constant
// outcomes) are not lost to rounding.
bool at_least(double abs_star, double abs_obs) {
    return abs_star >= abs_obs - 1e-12 * (1.0 + abs_obs);
}

struct PairView {
    std::vector<double> means;  // text-level means, group order
    long n_treated = 0;
};

std::vector<PairView> pair_views(const std::vector<DesignGroup>& groups) {
    std::vector<PairView> views;
    views.reserve(groups.size());
    for (const DesignGroup& g : groups) {
        check_group(g);
        PairView v;
        v.means.reserve(g.rows.size());
        for (const GroupRow& r : g.rows) {
            v.means.push_back(r.text_mean);
            v.n_treated += r.treatment;
        }
        views.push_back(std::move(v));
    }
    return views;
}

double pair_diff(const DesignGroup& g) {
    double sum1 = 0.0, sum0 = 0.0;
    long n1 = 0, n0 = 0;
    for (const GroupRow& r : g.rows) {
        if (r.treatment == 1) {
            sum1 += r.text_mean;
            ++n1;
        } else {
            sum0 += r.text_mean;
            ++n0;
        }
    }
    return sum1 / static_cast<double>(n1) - sum0 / static_cast<double>(n0);
}

}  // namespace

void check_group(const DesignGroup& g) {
    if (g.rows.size() < 2)
        fail(errc::invariant_violation, "pair '" + g.pair_id + "' has fewer than 2 versions");
    long n1 = 0, n0 = 0;
    for (const GroupRow& r : g.rows) {
        if (r.evals.empty())
            fail(errc::empty_arm,
                 "text '" + r.text_id + "' in pair '" + g.pair_id + "' has no evaluations");
        (r.treatment == 1 ? n1 : n0) += 1;
    }
    if (n1 == 0 || n0 == 0)
        fail(errc::empty_arm, "pair '" + g.pair_id + "' lacks " +
                                  (n1 == 0 ? std::string("a treated") : std::string("a control")) +
                                  " arm");
}

std::vector<DesignGroup> build_groups(const Corpus& corpus, const std::string& outcome) {
    std::unordered_map<std::string, std::vector<EvalObs>> evals_by_text;
    for (const Evaluation& e : corpus.evaluations)
        if (e.outcome == outcome) evals_by_text[e.text_id].push_back({e.value, e.evaluator_id});

    std::map<std::string, DesignGroup> by_pair;  // ordered: deterministic output
    for (const TextUnit& u : corpus.units) {
        const auto it = evals_by_text.find(u.text_id);
        if (it == evals_by_text.end()) continue;
        GroupRow row;
        row.text_id = u.text_id;
        row.treatment = u.treatment;
        row.evals = it->second;
        double sum = 0.0;
        for (const EvalObs& o : row.evals) sum += o.value;
        row.text_mean = sum / static_cast<double>(row.evals.size());
        auto& g = by_pair[u.pair_id];
        g.pair_id = u.pair_id;
        g.rows.push_back(std::move(row));
    }

    std::vector<DesignGroup> groups;
    groups.reserve(by_pair.size());
    for (auto& [pair_id, g] : by_pair) {
        long n1 = 0, n0 = 0;
        for (const GroupRow& r : g.rows) (r.treatment == 1 ? n1 : n0) += 1;
        if (n1 >= 1 && n0 >= 1 && g.rows.size() >= 2) groups.push_back(std::move(g));
    }
    return groups;
}

double tau_t_point(const std::vector<DesignGroup>& groups) {
    if (groups.empty()) fail(errc::empty_input, "no design groups");
    double acc = 0.0;
    for (const DesignGroup& g : groups) {
        check_group(g);
        acc += pair_diff(g);
    }
    return acc / static_cast<double>(groups.size());
}

double tau_t_wls_point(const std::vector<DesignGroup>& groups) {
    if (groups.empty()) fail(errc::empty_input, "no design groups");
    // Absorb pair fixed effects by weighted demeaning, then solve the single
    // remaining regressor from the orthogonalized inner products.
    long double sxy = 0.0L, sxx = 0.0L;
    for (const DesignGroup& g : groups) {
        check_group(g);
        long n1 = 0, n0 = 0;
        for (const GroupRow& r : g.rows) (r.treatment == 1 ? n1 : n0) += 1;
        // Weight 1/(arm size); weighted pair means follow.
        long double wsum = 0.0L, wy = 0.0L, wt = 0.0L;
        for (const GroupRow& r : g.rows) {
            const long double w = 1.0L / static_cast<long double>(r.treatment == 1 ? n1 : n0);
            wsum += w;
            wy += w * r.text_mean;
            wt += w * r.treatment;
        }
        if (wsum <= 0.0L) fail(errc::singular_design, "pair '" + g.pair_id + "' has zero weight");
        const long double ybar = wy / wsum;
        const long double tbar = wt / wsum;
        long double pair_sxx = 0.0L;
        for (const GroupRow& r : g.rows) {
            const long double w = 1.0L / static_cast<long double>(r.treatment == 1 ? n1 : n0);
            const long double sw = std::sqrt(static_cast<double>(w));
            const long double u = sw * (r.treatment - tbar);
            const long double v = sw * (r.text_mean - ybar);
            sxy += u * v;
            pair_sxx += u * u;
        }
        if (pair_sxx <= 0.0L)
            fail(errc::singular_design,
                 "pair '" + g.pair_id + "' has no weighted treatment variance");
        sxx += pair_sxx;
    }
    return static_cast<double>(sxy / sxx);
}

namespace {

EffectEstimate base_estimate(const std::vector<DesignGroup>& groups, const std::string& outcome,
                             const std::string& name, double point) {
    EffectEstimate est;
    est.estimator_name = name;
    est.outcome = outcome;
    est.point = point;
    for (const DesignGroup& g : groups) {
        est.n_texts += static_cast<long>(g.rows.size());
        for (const GroupRow& r : g.rows) est.n_evals += static_cast<long>(r.evals.size());
    }
    est.metadata["n_pairs"] = std::to_string(groups.size());
    return est;
}

}  // namespace

EffectEstimate tau_t_hat(const std::vector<DesignGroup>& groups, const std::string& outcome) {
    return base_estimate(groups, outcome, "tau_t", tau_t_point(groups));
}

EffectEstimate tau_t_wls(const std::vector<DesignGroup>& groups, const std::string& outcome) {
    return base_estimate(groups, outcome, "tau_t_wls", tau_t_wls_point(groups));
}

namespace {

// Statistic over an arrangement: per pair, `treated` flags selected versions.
double stat_for_labels(const std::vector<PairView>& views,
                       const std::vector<std::vector<char>>& treated) {
    double acc = 0.0;
    for (std::size_t i = 0; i < views.size(); ++i) {
        const auto& m = views[i].means;
        double s1 = 0.0, s0 = 0.0;
        long n1 = 0, n0 = 0;
        for (std::size_t j = 0; j < m.size(); ++j) {
            if (treated[i][j]) {
                s1 += m[j];
                ++n1;
            } else {
                s0 += m[j];
                ++n0;
            }
        }
        acc += s1 / static_cast<double>(n1) - s0 / static_cast<double>(n0);
    }
    return acc / static_cast<double>(views.size());
}

}  // namespace

double permutation_pvalue(const std::vector<DesignGroup>& groups, long n_perm,
                          std::uint64_t seed) {
    if (n_perm < 100) fail(errc::config_error, "n_perm must be >= 100");
    const auto views = pair_views(groups);
    const double observed = std::abs(tau_t_point(groups));

    const Rng master(seed);
    std::vector<std::size_t> idx;
    long hits = 0;
    for (long d = 0; d < n_perm; ++d) {
        // Per-draw sub-stream: draws are reproducible independently of order.
        Rng rng = master.child(static_cast<std::uint64_t>(d));
        double acc = 0.0;
        for (const PairView& v : views) {
            const std::size_t J = v.means.size();
            idx.resize(J);
            for (std::size_t j = 0; j < J; ++j) idx[j] = j;
            // Partial Fisher-Yates: first n_treated slots become the treated set.
            for (long k = 0; k < v.n_treated; ++k) {
                const std::size_t j =
                    k + static_cast<std::size_t>(rng.bounded(static_cast<std::uint64_t>(J - k)));
                std::swap(idx[k], idx[j]);
            }
            double s1 = 0.0, s_all = 0.0;
            for (std::size_t j = 0; j < J; ++j) s_all += v.means[j];
            for (long k = 0; k < v.n_treated; ++k) s1 += v.means[idx[k]];
            const double n1 = static_cast<double>(v.n_treated);
            const double n0 = static_cast<double>(J) - n1;
            acc += s1 / n1 - (s_all - s1) / n0;
        }
        const double stat = std::abs(acc / static_cast<double>(views.size()));
        if (at_least(stat, observed)) ++hits;
    }
    return static_cast<double>(1 + hits) / static_cast<double>(1 + n_perm);
}

std::uint64_t permutation_arrangements(const std::vector<DesignGroup>& groups) {
    auto choose = [](std::uint64_t n, std::uint64_t k) {
        std::uint64_t r = 1;
        for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
        return r;
    };
    std::uint64_t total = 1;
    for (const DesignGroup& g : groups) {
        std::uint64_t t = 0;
        for (const GroupRow& r : g.rows) t += r.treatment;
        const std::uint64_t c = choose(g.rows.size(), t);
        if (total > ~std::uint64_t{0} / c) return ~std::uint64_t{0};
        total *= c;
    }
    return total;
}

double permutation_pvalue_exact(const std::vector<DesignGroup>& groups,
                                std::uint64_t max_arrangements) {
    const auto views = pair_views(groups);
    const double observed = std::abs(tau_t_point(groups));

    const std::uint64_t total = permutation_arrangements(groups);
    if (total > max_arrangements)
        fail(errc::config_error, "exact permutation test needs " + std::to_string(total) +
                                     " arrangements (cap " + std::to_string(max_arrangements) +
                                     "); use the sampled test");

    // Enumerate combinations per pair once.
    std::vector<std::vector<std::vector<char>>> combos(views.size());
    for (std::size_t i = 0; i < views.size(); ++i) {
        const std::size_t J = views[i].means.size();
        const long t = views[i].n_treated;
        std::vector<char> mask(J, 0);
        std::fill(mask.begin(), mask.begin() + t, 1);
        std::sort(mask.begin(), mask.end());
        do {
            combos[i].push_back(mask);
        } while (std::next_permutation(mask.begin(), mask.end()));
    }

    std::vector<std::size_t> odo(views.size(), 0);
    std::vector<std::vector<char>> labels(views.size());
    std::uint64_t hits = 0, count = 0;
    while (true) {
        for (std::size_t i = 0; i < views.size(); ++i) labels[i] = combos[i][odo[i]];
        if (at_least(std::abs(stat_for_labels(views, labels)), observed)) ++hits;
        ++count;
        std::size_t pos = 0;
        while (pos < odo.size()) {
            if (++odo[pos] < combos[pos].size()) break;
            odo[pos] = 0;
            ++pos;
        }
        if (pos == odo.size()) break;
    }
    return static_cast<double>(hits) / static_cast<double>(count);
}

ClusteredWls wls_evaluation_clustered(const std::vector<DesignGroup>& groups) {
    if (groups.empty()) fail(errc::empty_input, "no design groups");

    struct Obs {
        double y = 0.0;
        double t = 0.0;
        double w = 0.0;
        double ytil = 0.0;
        double ttil = 0.0;
        const std::string* cluster = nullptr;
    };
    std::vector<Obs> obs;

    for (const DesignGroup& g : groups) {
        check_group(g);
        long n1 = 0, n0 = 0;
        for (const GroupRow& r : g.rows) (r.treatment == 1 ? n1 : n0) += 1;
        const std::size_t first = obs.size();
        double wsum = 0.0, wy = 0.0, wt = 0.0;
        for (const GroupRow& r : g.rows) {
            // Text weight 1/(arm size), split equally over its evaluations so
            // the point estimate matches the text-level estimator.
            const double w_text = 1.0 / static_cast<double>(r.treatment == 1 ? n1 : n0);
            const double w = w_text / static_cast<double>(r.evals.size());
            for (const EvalObs& e : r.evals) {
                obs.push_back({e.value, static_cast<double>(r.treatment), w, 0.0, 0.0,
                               &e.evaluator_id});
                wsum += w;
                wy += w * e.value;
                wt += w * r.treatment;
            }
        }
        const double ybar = wy / wsum;
        const double tbar = wt / wsum;
        for (std::size_t k = first; k < obs.size(); ++k) {
            obs[k].ytil = obs[k].y - ybar;
            obs[k].ttil = obs[k].t - tbar;
        }
    }

    double sxx = 0.0, sxy = 0.0;
    for (const Obs& o : obs) {
        sxx += o.w * o.ttil * o.ttil;
        sxy += o.w * o.ttil * o.ytil;
    }
    if (sxx <= 0.0) fail(errc::singular_design, "no within-pair treatment variance");
    const double beta = sxy / sxx;

    std::map<std::string, double> score_by_cluster;
    for (const Obs& o : obs) {
        const double resid = o.ytil - beta * o.ttil;
        score_by_cluster[*o.cluster] += o.w * o.ttil * resid;
    }
    const long G = static_cast<long>(score_by_cluster.size());
    if (G < 2)
        fail(errc::single_cluster,
             "cluster-robust variance needs >= 2 evaluator clusters, found " + std::to_string(G));

    double meat = 0.0;
    for (const auto& [id, s] : score_by_cluster) meat += s * s;

    const double n = static_cast<double>(obs.size());
    const double k_params = static_cast<double>(groups.size()) + 1.0;  // pair FEs + treatment
    double correction = static_cast<double>(G) / static_cast<double>(G - 1);
    if (n > k_params) correction *= (n - 1.0) / (n - k_params);
    const double var = correction * meat / (sxx * sxx);

    ClusteredWls out;
    out.point = beta;
    out.std_error = std::sqrt(var);
    out.n_clusters = G;
    out.n_evals = static_cast<long>(obs.size());
    out.n_pairs = static_cast<long>(groups.size());
    if (out.std_error > 0.0) {
        const boost::math::students_t dist(static_cast<double>(G - 1));
        const double tstat = std::abs(beta / out.std_error);
        out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, tstat));
    } else {
        out.p_value = beta == 0.0 ? 1.0 : 0.0;
    }
    return out;
}

EffectEstimate tau_d_hat(const std::vector<TextUnit>& units,
                         const std::vector<Evaluation>& evaluations, const std::string& outcome) {
    std::unordered_map<std::string, std::pair<double, long>> acc;
    for (const Evaluation& e : evaluations) {
        if (e.outcome != outcome) continue;
        auto& slot = acc[e.text_id];
        slot.first += e.value;
        slot.second += 1;
    }

    double s1 = 0.0, s0 = 0.0, ss1 = 0.0, ss0 = 0.0;
    long n1 = 0, n0 = 0, n_evals = 0;
    for (const TextUnit& u : units) {
        const auto it = acc.find(u.text_id);
        if (it == acc.end()) continue;
        const double m = it->second.first / static_cast<double>(it->second.second);
        n_evals += it->second.second;
        if (u.treatment == 1) {
            s1 += m;
            ss1 += m * m;
            ++n1;
        } else {
            s0 += m;
            ss0 += m * m;
            ++n0;
        }
    }
    if (n1 == 0 || n0 == 0)
        fail(errc::empty_arm, "tau_d: " + std::string(n1 == 0 ? "treated" : "control") +
                                  " arm has no evaluated texts for outcome '" + outcome + "'");

    const double m1 = s1 / n1;
    const double m0 = s0 / n0;
    EffectEstimate est;
    est.estimator_name = "tau_d";
    est.outcome = outcome;
    est.point = m1 - m0;
    est.n_texts = n1 + n0;
    est.n_evals = n_evals;
    if (n1 > 1 && n0 > 1) {
        const double v1 = (ss1 - n1 * m1 * m1) / static_cast<double>(n1 - 1);
        const double v0 = (ss0 - n0 * m0 * m0) / static_cast<double>(n0 - 1);
        est.std_error = std::sqrt(std::max(0.0, v1 / n1 + v0 / n0));
    }
    est.metadata["n_treated_texts"] = std::to_string(n1);
    est.metadata["n_control_texts"] = std::to_string(n0);
    return est;
}

}  // namespace tfx
