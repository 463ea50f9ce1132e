#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "texteffect/types.hpp"

namespace tfx {

struct EvalObs {
    double value = 0.0;
    std::string evaluator_id;
};

struct GroupRow {
    std::string text_id;
    int treatment = 0;
    std::vector<EvalObs> evals;
    double text_mean = 0.0;  // mean of evals; outcomes enter the estimator at text level
};

// All versions of one original that carry evaluations for a given outcome.
struct DesignGroup {
    std::string pair_id;
    std::vector<GroupRow> rows;

    std::size_t versions() const { return rows.size(); }
};

// Assemble groups for one outcome. Pairs missing an arm (or missing evaluated
// texts entirely) are dropped; the paired estimators require both arms.
std::vector<DesignGroup> build_groups(const Corpus& corpus, const std::string& outcome);

void check_group(const DesignGroup& g);  // empty_arm / invariant errors

// Paired estimator: average over pairs of (treated-arm mean - control-arm
// mean) of text-level outcomes.
double tau_t_point(const std::vector<DesignGroup>& groups);

// Same estimand via weighted least squares of text means on a treatment
// indicator with one fixed effect per pair, weights 1/(versions in the text's
// arm), fixed effects absorbed by weighted demeaning. Numerically equal to
// tau_t_point.
double tau_t_wls_point(const std::vector<DesignGroup>& groups);

EffectEstimate tau_t_hat(const std::vector<DesignGroup>& groups, const std::string& outcome);
EffectEstimate tau_t_wls(const std::vector<DesignGroup>& groups, const std::string& outcome);

// Two-sided permutation p-value: within each pair independently permute
// treatment labels across versions, preserving the number treated.
// p = (1 + #{|stat*| >= |stat|}) / (1 + n_perm).
double permutation_pvalue(const std::vector<DesignGroup>& groups, long n_perm, std::uint64_t seed);

// Full enumeration of the within-pair relabeling group;
// p = #{|stat*| >= |stat|} / #arrangements (identity included).
double permutation_pvalue_exact(const std::vector<DesignGroup>& groups,
                                std::uint64_t max_arrangements = 1u << 22);

std::uint64_t permutation_arrangements(const std::vector<DesignGroup>& groups);

struct ClusteredWls {
    double point = 0.0;
    double std_error = 0.0;
    double p_value = 1.0;
    long n_clusters = 0;
    long n_evals = 0;
    long n_pairs = 0;
};

// Evaluation-level WLS (weights split per evaluation so the point estimate is
// unchanged) with cluster-robust sandwich variance, clustering on evaluator.
ClusteredWls wls_evaluation_clustered(const std::vector<DesignGroup>& groups);

// Effect of exposure to labeled documents: difference in mean text-level
// outcomes between D=1 and D=0 texts, ignoring pairing.
EffectEstimate tau_d_hat(const std::vector<TextUnit>& units,
                         const std::vector<Evaluation>& evaluations, const std::string& outcome);

}  // namespace tfx
