#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tfx {

enum class LearnerKind { tree_ensemble_classifier, tree_ensemble_regressor };

struct FeatureRule {
    enum class Kind { sqrt_p, all, fixed };
    Kind kind = Kind::sqrt_p;
    int fixed = 0;

    int resolve(int p) const;
    static FeatureRule sqrt() { return {Kind::sqrt_p, 0}; }
    static FeatureRule all() { return {Kind::all, 0}; }
    static FeatureRule count(int k) { return {Kind::fixed, k}; }
};

// Tree-ensemble defaults are fixed here so "default hyperparameters" means
// the same thing everywhere: 100 trees, unbounded depth, min_leaf 1
// (classifier) / 5 (regressor), sqrt(p) features per split, bootstrap on.
struct LearnerSpec {
    LearnerKind kind = LearnerKind::tree_ensemble_classifier;
    int n_trees = 100;
    int max_depth = 0;  // 0 = unbounded
    int min_leaf = 1;
    FeatureRule features_per_split = FeatureRule::sqrt();
    bool bootstrap = true;
    std::uint64_t seed = 0;

    static LearnerSpec classifier(std::uint64_t seed);
    static LearnerSpec regressor(std::uint64_t seed);
};

// Dense row-major feature view; rows are observations.
struct FeatureView {
    const float* data = nullptr;
    std::size_t n = 0;
    std::size_t p = 0;

    const float* row(std::size_t i) const { return data + i * p; }
};

// Random forest for both regression (leaf means) and binary classification
// (leaf positive fractions, averaged over trees). Randomness is derived from
// (seed, tree index) only, so fits are reproducible under any scheduling.
class RandomForest {
public:
    static RandomForest fit(const LearnerSpec& spec, const FeatureView& X,
                            std::span<const double> y);
    static RandomForest fit_subset(const LearnerSpec& spec, const FeatureView& X,
                                   std::span<const double> y,
                                   std::span<const int> train_rows);

    double predict_row(const float* row) const;
    std::vector<double> predict(const FeatureView& X) const;

    std::size_t n_trees() const { return trees_.size(); }

private:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        float threshold = 0.0f;
        int left = 0;
        int right = 0;
        float value = 0.0f;
    };
    std::vector<std::vector<Node>> trees_;
    std::size_t p_ = 0;
};

}  // namespace tfx
