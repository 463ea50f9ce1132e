#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "texteffect/types.hpp"

namespace tfx {

enum class SimMode { baseline, amplified };

// Knobs for the semi-synthetic confounded benchmark. selection_floor keeps
// selection probabilities inside [floor, 1-floor], so positivity holds by
// construction.
struct SimConfig {
    SimMode mode = SimMode::amplified;
    double selection_strength = 0.8;  // kappa
    double selection_floor = 0.05;    // epsilon, in (0, 0.5)
    int outcome_shift = 1;            // s, Likert steps
    double effect_delta = 0.6;        // delta
    int dichotomize_threshold = 4;    // in [2,5]
    int n_replicas = 100;
    std::uint64_t seed = 0;
};

void validate_sim_config(const SimConfig& config);

// Selection probability for one text:
// clamp(0.5 + kappa * (2T-1) * (r-50)/100, floor, 1-floor).
double selection_probability(double respect_mean, int treatment, const SimConfig& config);

// Independent per-text selection; keyed by (replica_seed, text_id) so the
// result does not depend on iteration order.
std::set<std::string> select_filtered(const Corpus& corpus, const SimConfig& config,
                                      std::uint64_t replica_seed);

// Amplified mode: shift Likert values +s for texts whose mean respect rating
// is at or above the corpus median, -s otherwise; clip to [1,5].
std::vector<Evaluation> amplify_outcomes(const std::vector<Evaluation>& evaluations,
                                         const std::vector<LatentRating>& ratings,
                                         const SimConfig& config);

// Add +delta to treated texts' outcomes and -delta to control texts', with no
// clipping (runs on the Likert scale treated as continuous, before
// dichotomization).
std::vector<Evaluation> inject_effect(const std::vector<Evaluation>& evaluations,
                                      const std::vector<TextUnit>& units, double delta);

std::vector<Evaluation> dichotomize(const std::vector<Evaluation>& evaluations, double threshold);

struct ViewRow {
    std::string text_id;
    int treatment = 0;
    std::string topic;
    std::string body;
    std::map<std::string, double> outcomes;  // per-label mean of binary evaluations
};

struct Replica {
    int replica_index = 0;
    std::vector<std::string> selected_text_ids;        // sorted
    std::vector<ViewRow> view;                         // the observational sample
    std::map<std::string, double> ground_truth;        // per outcome
    std::map<std::string, long> ground_truth_pairs;    // pairs contributing
};

struct Band {
    double lo = 0.0;
    double hi = 0.0;
};

struct SimRun {
    std::vector<std::string> outcomes;
    std::vector<Replica> replicas;
    std::map<std::string, Band> bands;                 // 2.5-97.5 pct of replica truths
    std::map<std::string, double> population_truth;    // paired estimate on the full
                                                       // modified (unselected) data
};

// Full pipeline: modify outcomes (amplified mode), dichotomize, then per
// replica select a filtered view and compute the paired ground truth on the
// replica's pair-completed frame (selected edits plus their originals, the
// original restored even when filtered out of the view).
SimRun generate_replicas(const Corpus& corpus, const SimConfig& config);

// Single replica, reproducible from (config.seed, replica_index).
Replica generate_replica(const Corpus& corpus, const SimConfig& config, int replica_index);

double quantile_linear(std::vector<double> values, double q);

}  // namespace tfx
