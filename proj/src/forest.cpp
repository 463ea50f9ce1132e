#include "texteffect/forest.hpp"

#include <algorithm>
#include <cmath>

#include "texteffect/error.hpp"
#include "texteffect/rng.hpp"

namespace tfx {

int FeatureRule::resolve(int p) const {
    switch (kind) {
        case Kind::sqrt_p: {
            const int k = static_cast<int>(std::floor(std::sqrt(static_cast<double>(p))));
            return std::clamp(k, 1, p);
        }
        case Kind::all:
            return p;
        case Kind::fixed:
            return std::clamp(fixed, 1, p);
    }
    return p;
}

LearnerSpec LearnerSpec::classifier(std::uint64_t seed) {
    LearnerSpec s;
    s.kind = LearnerKind::tree_ensemble_classifier;
    s.min_leaf = 1;
    s.seed = seed;
    return s;
}

LearnerSpec LearnerSpec::regressor(std::uint64_t seed) {
    LearnerSpec s;
    s.kind = LearnerKind::tree_ensemble_regressor;
    s.min_leaf = 5;
    s.seed = seed;
    return s;
}

namespace {

struct TreeBuilder {
    const FeatureView& X;
    std::span<const double> y;
    const LearnerSpec& spec;
    Rng rng;
    int mtry;

    std::vector<int> samples;                       // indices into X rows (bootstrap)
    std::vector<int> feat_perm;                     // lazily shuffled feature order
    std::vector<std::pair<float, float>> sort_buf;  // (feature value, outcome)

    struct RawNode {
        int feature = -1;
        float threshold = 0.0f;
        int left = 0;
        int right = 0;
        float value = 0.0f;
    };
    std::vector<RawNode> nodes;

    TreeBuilder(const FeatureView& x, std::span<const double> yy, const LearnerSpec& s, Rng r)
        : X(x), y(yy), spec(s), rng(r) {
        mtry = s.features_per_split.resolve(static_cast<int>(X.p));
        feat_perm.resize(X.p);
        for (std::size_t j = 0; j < X.p; ++j) feat_perm[j] = static_cast<int>(j);
    }

    int build(int lo, int hi, int depth) {
        const int count = hi - lo;
        double sum = 0.0, sumsq = 0.0;
        for (int k = lo; k < hi; ++k) {
            const double v = y[static_cast<std::size_t>(samples[k])];
            sum += v;
            sumsq += v * v;
        }
        const double node_value = sum / count;
        const double impurity = sumsq - sum * sum / count;  // SSE; for 0/1 labels this
                                                            // is the gini proxy
        const double eps = 1e-10 * std::max(1.0, sumsq);

        const bool depth_stop = spec.max_depth > 0 && depth >= spec.max_depth;
        if (count < 2 || count < 2 * spec.min_leaf || depth_stop || impurity <= eps)
            return make_leaf(node_value);

        // Draw candidate features without replacement; features that are
        // constant in this node do not count against mtry.
        int best_feature = -1;
        float best_threshold = 0.0f;
        double best_score = sum * sum / count + eps;
        int tried = 0;
        for (std::size_t k = 0; k < X.p && tried < mtry; ++k) {
            const std::size_t j =
                k + static_cast<std::size_t>(rng.bounded(static_cast<std::uint64_t>(X.p - k)));
            std::swap(feat_perm[k], feat_perm[j]);
            const int f = feat_perm[k];

            sort_buf.clear();
            for (int s = lo; s < hi; ++s) {
                const int row = samples[s];
                sort_buf.emplace_back(X.row(row)[f], static_cast<float>(y[row]));
            }
            std::sort(sort_buf.begin(), sort_buf.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            if (sort_buf.front().first == sort_buf.back().first) continue;  // constant
            ++tried;

            double left_sum = 0.0;
            for (int i = 0; i < count - 1; ++i) {
                left_sum += sort_buf[i].second;
                if (sort_buf[i].first == sort_buf[i + 1].first) continue;
                const int nl = i + 1;
                const int nr = count - nl;
                if (nl < spec.min_leaf || nr < spec.min_leaf) continue;
                const double right_sum = sum - left_sum;
                const double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
                if (score > best_score) {
                    best_score = score;
                    best_feature = f;
                    best_threshold =
                        0.5f * (sort_buf[i].first + sort_buf[i + 1].first);
                }
            }
        }

        if (best_feature < 0) return make_leaf(node_value);

        const auto mid_it = std::partition(samples.begin() + lo, samples.begin() + hi,
                                           [&](int row) {
                                               return X.row(row)[best_feature] <= best_threshold;
                                           });
        const int mid = static_cast<int>(mid_it - samples.begin());
        if (mid == lo || mid == hi) return make_leaf(node_value);  // numeric edge case

        const int id = static_cast<int>(nodes.size());
        nodes.push_back({best_feature, best_threshold, 0, 0, 0.0f});
        const int left = build(lo, mid, depth + 1);
        const int right = build(mid, hi, depth + 1);
        nodes[id].left = left;
        nodes[id].right = right;
        return id;
    }

    int make_leaf(double value) {
        const int id = static_cast<int>(nodes.size());
        nodes.push_back({-1, 0.0f, 0, 0, static_cast<float>(value)});
        return id;
    }
};

}  // namespace

RandomForest RandomForest::fit_subset(const LearnerSpec& spec, const FeatureView& X,
                                      std::span<const double> y,
                                      std::span<const int> train_rows) {
    if (train_rows.empty()) fail(errc::empty_input, "random forest: no training rows");
    if (spec.n_trees < 1) fail(errc::config_error, "n_trees must be >= 1");
    if (spec.kind == LearnerKind::tree_ensemble_classifier)
        for (int r : train_rows)
            if (y[r] != 0.0 && y[r] != 1.0)
                fail(errc::config_error, "classifier labels must be 0/1");

    RandomForest forest;
    forest.p_ = X.p;
    forest.trees_.reserve(spec.n_trees);
    const Rng master(spec.seed);
    const std::size_t n = train_rows.size();

    for (int t = 0; t < spec.n_trees; ++t) {
        Rng tree_rng = master.child(static_cast<std::uint64_t>(t));
        TreeBuilder builder(X, y, spec, tree_rng.child(1));
        builder.samples.resize(n);
        if (spec.bootstrap) {
            Rng boot = tree_rng.child(0);
            for (std::size_t k = 0; k < n; ++k)
                builder.samples[k] = train_rows[boot.bounded(n)];
        } else {
            std::copy(train_rows.begin(), train_rows.end(), builder.samples.begin());
        }
        // Root node goes first; builder returns its index (always 0).
        builder.build(0, static_cast<int>(n), 0);
        std::vector<Node> tree(builder.nodes.size());
        for (std::size_t i = 0; i < builder.nodes.size(); ++i) {
            const auto& raw = builder.nodes[i];
            tree[i] = Node{raw.feature, raw.threshold, raw.left, raw.right, raw.value};
        }
        forest.trees_.push_back(std::move(tree));
    }
    return forest;
}

RandomForest RandomForest::fit(const LearnerSpec& spec, const FeatureView& X,
                               std::span<const double> y) {
    std::vector<int> rows(X.n);
    for (std::size_t i = 0; i < X.n; ++i) rows[i] = static_cast<int>(i);
    return fit_subset(spec, X, y, rows);
}

double RandomForest::predict_row(const float* row) const {
    double acc = 0.0;
    for (const auto& tree : trees_) {
        int id = 0;
        while (tree[id].feature >= 0)
            id = row[tree[id].feature] <= tree[id].threshold ? tree[id].left : tree[id].right;
        acc += tree[id].value;
    }
    return acc / static_cast<double>(trees_.size());
}

std::vector<double> RandomForest::predict(const FeatureView& X) const {
    if (X.p != p_) fail(errc::config_error, "random forest: feature dimension mismatch");
    std::vector<double> out(X.n);
    for (std::size_t i = 0; i < X.n; ++i) out[i] = predict_row(X.row(i));
    return out;
}

}  // namespace tfx
