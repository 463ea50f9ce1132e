#include "texteffect/nuisance.hpp"

#include <algorithm>
#include <numeric>

#include "texteffect/error.hpp"
#include "texteffect/rng.hpp"

namespace tfx {

std::vector<int> make_stratified_folds(std::span<const std::string> unit_ids,
                                       std::span<const int> treatment, int k_folds,
                                       std::uint64_t seed) {
    if (k_folds < 2) fail(errc::config_error, "k_folds must be >= 2");
    const std::size_t n = unit_ids.size();
    if (treatment.size() != n) fail(errc::config_error, "treatment/ids size mismatch");

    // Canonical order by id, then shuffle within each arm and deal round-robin.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return unit_ids[a] < unit_ids[b]; });

    const Rng master(seed);
    std::vector<int> fold(n, -1);
    for (int arm = 0; arm <= 1; ++arm) {
        std::vector<int> members;
        for (int i : order)
            if (treatment[i] == arm) members.push_back(i);
        Rng rng = master.child(static_cast<std::uint64_t>(arm));
        rng.shuffle(members);
        for (std::size_t k = 0; k < members.size(); ++k)
            fold[members[k]] = static_cast<int>(k % static_cast<std::size_t>(k_folds));
    }

    // Every training split (the complement of one fold) must keep both arms.
    for (int f = 0; f < k_folds; ++f) {
        long treated = 0, control = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (fold[i] == f) continue;
            (treatment[i] == 1 ? treated : control) += 1;
        }
        if (treated == 0 || control == 0)
            fail(errc::degenerate_fold, "training split for fold " + std::to_string(f) +
                                            " lacks a treatment arm");
    }
    return fold;
}

namespace {

LearnerSpec make_spec(LearnerKind kind, const NuisanceOptions& opts, std::uint64_t seed) {
    LearnerSpec spec = kind == LearnerKind::tree_ensemble_classifier
                           ? LearnerSpec::classifier(seed)
                           : LearnerSpec::regressor(seed);
    spec.n_trees = opts.n_trees;
    spec.max_depth = opts.max_depth;
    spec.features_per_split = opts.features_per_split;
    spec.bootstrap = opts.bootstrap;
    return spec;
}

// Canonical row order for training: sorted by unit id. Keeps bootstrap draws
// and split arithmetic independent of input row order.
std::vector<int> canonical_order(std::span<const std::string> unit_ids) {
    std::vector<int> order(unit_ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return unit_ids[a] < unit_ids[b]; });
    return order;
}

}  // namespace

std::vector<double> crossfit_propensity(const FeatureView& X,
                                        std::span<const std::string> unit_ids,
                                        std::span<const int> treatment,
                                        std::span<const int> fold, int k_folds,
                                        const NuisanceOptions& opts) {
    const std::size_t n = X.n;
    if (unit_ids.size() != n) fail(errc::config_error, "crossfit_propensity: id size mismatch");
    std::vector<double> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = treatment[i];
    const auto order = canonical_order(unit_ids);

    const Rng master(opts.seed);
    std::vector<double> e(n, 0.0);
    for (int f = 0; f < k_folds; ++f) {
        std::vector<int> train;
        train.reserve(n);
        for (int i : order)
            if (fold[i] != f) train.push_back(i);
        const auto spec = make_spec(LearnerKind::tree_ensemble_classifier, opts,
                                    master.child_str("e").child(f).base_seed());
        const RandomForest forest = RandomForest::fit_subset(spec, X, labels, train);
        for (std::size_t i = 0; i < n; ++i)
            if (fold[i] == f) e[i] = forest.predict_row(X.row(i));
    }
    return e;
}

void crossfit_outcomes(const FeatureView& X, std::span<const std::string> unit_ids,
                       std::span<const int> treatment, std::span<const double> outcome,
                       std::span<const int> fold, int k_folds, const NuisanceOptions& opts,
                       std::vector<double>& q1, std::vector<double>& q0) {
    const std::size_t n = X.n;
    if (unit_ids.size() != n) fail(errc::config_error, "crossfit_outcomes: id size mismatch");
    q1.assign(n, 0.0);
    q0.assign(n, 0.0);
    const auto order = canonical_order(unit_ids);
    const Rng master(opts.seed);
    for (int f = 0; f < k_folds; ++f) {
        std::vector<int> train1, train0;
        for (int i : order) {
            if (fold[i] == f) continue;
            (treatment[i] == 1 ? train1 : train0).push_back(i);
        }
        if (train1.empty() || train0.empty())
            fail(errc::degenerate_fold,
                 "training split for fold " + std::to_string(f) + " lacks a treatment arm");
        const auto spec1 = make_spec(LearnerKind::tree_ensemble_regressor, opts,
                                     master.child_str("q1").child(f).base_seed());
        const auto spec0 = make_spec(LearnerKind::tree_ensemble_regressor, opts,
                                     master.child_str("q0").child(f).base_seed());
        const RandomForest f1 = RandomForest::fit_subset(spec1, X, outcome, train1);
        const RandomForest f0 = RandomForest::fit_subset(spec0, X, outcome, train0);
        for (std::size_t i = 0; i < n; ++i) {
            if (fold[i] != f) continue;
            q1[i] = f1.predict_row(X.row(i));
            q0[i] = f0.predict_row(X.row(i));
        }
    }
}

NuisanceFits fit_nuisance(const DocTermMatrix& dtm, std::span<const int> treatment,
                          std::span<const double> outcome, const NuisanceOptions& opts) {
    if (dtm.n_docs() != treatment.size() || dtm.n_docs() != outcome.size())
        fail(errc::config_error, "fit_nuisance: input size mismatch");
    const auto dense = dtm.dense();
    const FeatureView X{dense.data(), dtm.n_docs(), dtm.n_terms()};

    NuisanceFits fits;
    fits.fold = make_stratified_folds(dtm.doc_ids, treatment, opts.k_folds,
                                      Rng(opts.seed).child_str("folds").base_seed());
    fits.e = crossfit_propensity(X, dtm.doc_ids, treatment, fits.fold, opts.k_folds, opts);
    crossfit_outcomes(X, dtm.doc_ids, treatment, outcome, fits.fold, opts.k_folds, opts, fits.q1,
                      fits.q0);
    return fits;
}

BoundedFits bound_propensities(const NuisanceFits& fits, double lo, double hi, BoundMode mode) {
    if (!(0.0 < lo && lo < hi && hi < 1.0))
        fail(errc::config_error, "bounds must satisfy 0 < lo < hi < 1");
    BoundedFits out;
    const std::size_t n = fits.e.size();
    if (mode == BoundMode::winsorize) {
        out.fits = fits;
        for (double& v : out.fits.e) v = std::clamp(v, lo, hi);
        out.kept_rows.resize(n);
        std::iota(out.kept_rows.begin(), out.kept_rows.end(), 0);
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (fits.e[i] < lo || fits.e[i] > hi) continue;
        out.kept_rows.push_back(static_cast<int>(i));
        out.fits.e.push_back(fits.e[i]);
        if (!fits.q1.empty()) out.fits.q1.push_back(fits.q1[i]);
        if (!fits.q0.empty()) out.fits.q0.push_back(fits.q0[i]);
        if (!fits.fold.empty()) out.fits.fold.push_back(fits.fold[i]);
    }
    if (out.kept_rows.empty())
        fail(errc::all_trimmed, "bound_propensities: trimming removed every unit");
    return out;
}

}  // namespace tfx
