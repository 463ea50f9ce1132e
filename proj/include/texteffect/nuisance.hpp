#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "texteffect/bow.hpp"
#include "texteffect/forest.hpp"

namespace tfx {

// Cross-fitted nuisance estimates: every unit is scored by models trained on
// folds that exclude it. e = P(T=1 | x); q1/q0 = E[Y | x, T=1/0].
struct NuisanceFits {
    std::vector<double> e;
    std::vector<double> q1;
    std::vector<double> q0;
    std::vector<int> fold;
};

struct NuisanceOptions {
    int k_folds = 5;
    int n_trees = 100;
    int max_depth = 0;  // unbounded
    FeatureRule features_per_split = FeatureRule::sqrt();
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

// Stratified fold assignment keyed by unit id (not input position): fold
// structure is invariant to row permutation. Fails with degenerate_fold when
// some training split would miss a treatment arm.
std::vector<int> make_stratified_folds(std::span<const std::string> unit_ids,
                                       std::span<const int> treatment, int k_folds,
                                       std::uint64_t seed);

// unit_ids fix the training-row order (sorted by id), so fits are invariant
// to the order rows arrive in.
std::vector<double> crossfit_propensity(const FeatureView& X,
                                        std::span<const std::string> unit_ids,
                                        std::span<const int> treatment,
                                        std::span<const int> fold, int k_folds,
                                        const NuisanceOptions& opts);

// q1 models are trained on treated training units only, q0 on control ones.
void crossfit_outcomes(const FeatureView& X, std::span<const std::string> unit_ids,
                       std::span<const int> treatment, std::span<const double> outcome,
                       std::span<const int> fold, int k_folds, const NuisanceOptions& opts,
                       std::vector<double>& q1, std::vector<double>& q0);

NuisanceFits fit_nuisance(const DocTermMatrix& dtm, std::span<const int> treatment,
                          std::span<const double> outcome, const NuisanceOptions& opts);

enum class BoundMode { trim, winsorize };

struct BoundedFits {
    NuisanceFits fits;           // winsorize: same units, clipped e; trim: kept subset
    std::vector<int> kept_rows;  // indices into the original unit order
};

BoundedFits bound_propensities(const NuisanceFits& fits, double lo = 0.1, double hi = 0.9,
                               BoundMode mode = BoundMode::winsorize);

}  // namespace tfx
