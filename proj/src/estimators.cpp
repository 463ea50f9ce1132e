#include "texteffect/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "texteffect/error.hpp"
#include "texteffect/rng.hpp"

namespace tfx {

namespace {

void check_sizes(std::span<const int> t, std::span<const double> y) {
    if (t.size() != y.size() || t.empty())
        fail(errc::empty_input, "estimator inputs empty or mismatched");
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sd_of(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

EffectEstimate make_estimate(const std::string& name, double point, long n) {
    EffectEstimate est;
    est.estimator_name = name;
    est.point = point;
    est.n_texts = n;
    est.n_evals = n;
    return est;
}

}  // namespace

EffectEstimate diff_in_means(std::span<const int> treatment, std::span<const double> outcome) {
    check_sizes(treatment, outcome);
    double s1 = 0.0, s0 = 0.0, ss1 = 0.0, ss0 = 0.0;
    long n1 = 0, n0 = 0;
    for (std::size_t i = 0; i < treatment.size(); ++i) {
        if (treatment[i] == 1) {
            s1 += outcome[i];
            ss1 += outcome[i] * outcome[i];
            ++n1;
        } else {
            s0 += outcome[i];
            ss0 += outcome[i] * outcome[i];
            ++n0;
        }
    }
    if (n1 == 0 || n0 == 0)
        fail(errc::empty_arm, std::string("diff_in_means: ") +
                                  (n1 == 0 ? "treated" : "control") + " arm is empty");
    const double m1 = s1 / n1, m0 = s0 / n0;
    auto est = make_estimate("diff_in_means", m1 - m0, n1 + n0);
    if (n1 > 1 && n0 > 1) {
        const double v1 = (ss1 - n1 * m1 * m1) / static_cast<double>(n1 - 1);
        const double v0 = (ss0 - n0 * m0 * m0) / static_cast<double>(n0 - 1);
        est.std_error = std::sqrt(std::max(0.0, v1 / n1 + v0 / n0));
    }
    return est;
}

namespace {

// Sweep operator on the augmented cross-product matrix: after sweeping the
// regressor block, the last column holds coefficients and the swept diagonal
// holds -(X'X)^{-1}
struct SweepResult {
    std::vector<double> beta;
    std::vector<double> inv_diag;  // (X'X)^{-1} diagonal for kept columns
    std::vector<bool> kept;
    double rss = 0.0;
    int n_kept = 0;
};

SweepResult sweep_regression(const std::vector<std::vector<double>>& x, std::span<const double> y,
                             double tol = 1e-10) {
    const std::size_t p = x.size();
    const std::size_t n = y.size();
    const std::size_t m = p + 1;
    std::vector<std::vector<double>> a(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = i; j < p; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += x[i][k] * x[j][k];
            a[i][j] = a[j][i] = s;
        }
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += x[i][k] * y[k];
        a[i][p] = a[p][i] = s;
    }
    double yy = 0.0;
    for (std::size_t k = 0; k < n; ++k) yy += y[k] * y[k];
    a[p][p] = yy;

    std::vector<double> orig_diag(p);
    for (std::size_t i = 0; i < p; ++i) orig_diag[i] = a[i][i];

    SweepResult res;
    res.kept.assign(p, false);
    for (std::size_t k = 0; k < p; ++k) {
        const double d = a[k][k];
        if (orig_diag[k] <= 0.0 || std::abs(d) <= tol * std::max(orig_diag[k], 1e-300)) continue;
        res.kept[k] = true;
        ++res.n_kept;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == k) continue;
            const double factor = a[i][k] / d;
            for (std::size_t j = 0; j < m; ++j)
                if (j != k) a[i][j] -= factor * a[k][j];
            a[i][k] = -factor;
        }
        for (std::size_t j = 0; j < m; ++j)
            if (j != k) a[k][j] /= d;
        a[k][k] = -1.0 / d;
    }

    res.beta.assign(p, 0.0);
    res.inv_diag.assign(p, 0.0);
    for (std::size_t k = 0; k < p; ++k) {
        if (!res.kept[k]) continue;
        res.beta[k] = a[k][p];
        res.inv_diag[k] = -a[k][k];
    }
    res.rss = a[p][p];
    return res;
}

}  // namespace

EffectEstimate topic_adjusted(std::span<const int> treatment, std::span<const double> outcome,
                              std::span<const std::string> topic) {
    check_sizes(treatment, outcome);
    if (topic.size() != treatment.size())
        fail(errc::config_error, "topic_adjusted: topic size mismatch");

    std::set<std::string> topic_set(topic.begin(), topic.end());
    std::vector<std::string> levels(topic_set.begin(), topic_set.end());

    const std::size_t n = treatment.size();
    // Columns: intercept, treatment, then indicators for levels 2..K.
    std::vector<std::vector<double>> x;
    x.emplace_back(n, 1.0);
    {
        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = treatment[i];
        x.push_back(std::move(t));
    }
    for (std::size_t l = 1; l < levels.size(); ++l) {
        std::vector<double> col(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            if (topic[i] == levels[l]) col[i] = 1.0;
        x.push_back(std::move(col));
    }

    const auto res = sweep_regression(x, outcome);
    if (!res.kept[1])
        fail(errc::singular_design, "topic_adjusted: treatment indicator is collinear");

    auto est = make_estimate("topic_adjusted", res.beta[1], static_cast<long>(n));
    const long dof = static_cast<long>(n) - res.n_kept;
    if (dof > 0) {
        const double sigma2 = std::max(0.0, res.rss) / static_cast<double>(dof);
        est.std_error = std::sqrt(sigma2 * res.inv_diag[1]);
    }
    long dropped = 0;
    for (std::size_t k = 2; k < res.kept.size(); ++k)
        if (!res.kept[k]) ++dropped;
    if (dropped > 0) est.metadata["dropped_topic_indicators"] = std::to_string(dropped);
    est.metadata["n_topics"] = std::to_string(levels.size());
    return est;
}

EffectEstimate ipw_estimate(const NuisanceFits& fits, std::span<const int> treatment,
                            std::span<const double> outcome) {
    check_sizes(treatment, outcome);
    if (fits.e.size() != treatment.size())
        fail(errc::config_error, "ipw_estimate: propensity size mismatch");
    const std::size_t n = treatment.size();
    for (std::size_t i = 0; i < n; ++i)
        if (fits.e[i] <= 0.0 || fits.e[i] >= 1.0)
            fail(errc::extreme_propensity,
                 "ipw_estimate: propensity " + std::to_string(fits.e[i]) + " at unit " +
                     std::to_string(i) + " outside (0,1); trim or winsorize first");

    double sw1 = 0.0, swy1 = 0.0, sw0 = 0.0, swy0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (treatment[i] == 1) {
            const double w = 1.0 / fits.e[i];
            sw1 += w;
            swy1 += w * outcome[i];
        } else {
            const double v = 1.0 / (1.0 - fits.e[i]);
            sw0 += v;
            swy0 += v * outcome[i];
        }
    }
    if (sw1 == 0.0 || sw0 == 0.0)
        fail(errc::empty_arm, std::string("ipw_estimate: ") + (sw1 == 0.0 ? "treated" : "control") +
                                  " arm is empty");
    const double mu1 = swy1 / sw1;
    const double mu0 = swy0 / sw0;
    auto est = make_estimate("bow_ipw", mu1 - mu0, static_cast<long>(n));

    // Linearized influence-function standard error.
    std::vector<double> psi(n);
    const double w1bar = sw1 / static_cast<double>(n);
    const double w0bar = sw0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (treatment[i] == 1)
            psi[i] = (outcome[i] - mu1) / fits.e[i] / w1bar;
        else
            psi[i] = -(outcome[i] - mu0) / (1.0 - fits.e[i]) / w0bar;
    }
    est.std_error = sd_of(psi) / std::sqrt(static_cast<double>(n));
    est.metadata["weighting"] = "hajek";
    return est;
}

EffectEstimate or_estimate(const NuisanceFits& fits, std::span<const int> treatment,
                           std::span<const double> outcome) {
    check_sizes(treatment, outcome);
    if (fits.q1.size() != treatment.size() || fits.q0.size() != treatment.size())
        fail(errc::config_error, "or_estimate: outcome-model size mismatch");
    const std::size_t n = treatment.size();
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = fits.q1[i] - fits.q0[i];
    auto est = make_estimate("bow_or", mean_of(diff), static_cast<long>(n));
    est.std_error = sd_of(diff) / std::sqrt(static_cast<double>(n));
    return est;
}

EffectEstimate aipw_estimate(const NuisanceFits& fits, std::span<const int> treatment,
                             std::span<const double> outcome) {
    check_sizes(treatment, outcome);
    const std::size_t n = treatment.size();
    if (fits.e.size() != n || fits.q1.size() != n || fits.q0.size() != n)
        fail(errc::config_error, "aipw_estimate: nuisance size mismatch");

    std::vector<double> psi(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = fits.e[i];
        if ((treatment[i] == 1 && e == 0.0) || (treatment[i] == 0 && e == 1.0))
            fail(errc::non_computable, "aipw_estimate: propensity " + std::to_string(e) +
                                           " at unit " + std::to_string(i) +
                                           " makes the estimate non-computable");
        if (e <= 0.0 || e >= 1.0)
            fail(errc::extreme_propensity, "aipw_estimate: propensity " + std::to_string(e) +
                                                " at unit " + std::to_string(i) +
                                                " outside (0,1)");
        psi[i] = fits.q1[i] - fits.q0[i];
        if (treatment[i] == 1)
            psi[i] += (outcome[i] - fits.q1[i]) / e;
        else
            psi[i] -= (outcome[i] - fits.q0[i]) / (1.0 - e);
    }
    auto est = make_estimate("bow_aipw", mean_of(psi), static_cast<long>(n));
    est.std_error = sd_of(psi) / std::sqrt(static_cast<double>(n));
    return est;
}

ProbeResult leakage_probe(const DocTermMatrix& dtm, std::span<const int> treatment,
                          std::span<const double> outcome, const ProbeOptions& opts) {
    if (dtm.n_docs() != treatment.size() || dtm.n_docs() != outcome.size())
        fail(errc::config_error, "leakage_probe: input size mismatch");
    const std::size_t n = dtm.n_docs();

    ProbeResult result;
    result.stage1.fold = make_stratified_folds(dtm.doc_ids, treatment, opts.nuisance.k_folds,
                                               Rng(opts.nuisance.seed).child_str("folds")
                                                   .base_seed());

    const auto dense = dtm.dense();
    const FeatureView X{dense.data(), n, dtm.n_terms()};
    crossfit_outcomes(X, dtm.doc_ids, treatment, outcome, result.stage1.fold,
                      opts.nuisance.k_folds, opts.nuisance, result.stage1.q1, result.stage1.q0);

    // Stage 2: the representation handed to the propensity model is exactly
    // the pair of fitted conditional outcomes.
    std::vector<float> rep(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        rep[i * 2] = static_cast<float>(result.stage1.q0[i]);
        rep[i * 2 + 1] = static_cast<float>(result.stage1.q1[i]);
    }
    const FeatureView X2{rep.data(), n, 2};
    NuisanceOptions stage2 = opts.nuisance;
    stage2.seed = Rng(opts.nuisance.seed).child_str("stage2").base_seed();
    result.stage1.e = crossfit_propensity(X2, dtm.doc_ids, treatment, result.stage1.fold,
                                          opts.nuisance.k_folds, stage2);
    result.propensities = result.stage1.e;
    result.bins = propensity_bins(result.propensities, opts.bound_lo, opts.bound_hi);

    const BoundedFits bounded =
        bound_propensities(result.stage1, opts.bound_lo, opts.bound_hi, opts.bound_mode);
    std::vector<int> t_kept;
    std::vector<double> y_kept;
    t_kept.reserve(bounded.kept_rows.size());
    for (int row : bounded.kept_rows) {
        t_kept.push_back(treatment[row]);
        y_kept.push_back(outcome[row]);
    }
    result.estimate = aipw_estimate(bounded.fits, t_kept, y_kept);
    result.estimate.estimator_name = "leakage_probe";
    result.estimate.metadata["bound_mode"] =
        opts.bound_mode == BoundMode::winsorize ? "winsorize" : "trim";
    result.estimate.metadata["n_trimmed"] =
        std::to_string(static_cast<long>(n) - static_cast<long>(bounded.kept_rows.size()));
    return result;
}

}  // namespace tfx
