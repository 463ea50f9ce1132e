#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tfx {

// One version of one argument. version_index == 1 marks the original text;
// every later version is an edit whose treatment flips the original's.
struct TextUnit {
    std::string text_id;
    std::string pair_id;
    int version_index = 1;
    int treatment = 0;  // 0/1
    std::string topic;
    std::string body;

    bool is_original() const { return version_index == 1; }
};

// One rater's score of one text on one outcome label. Raw survey data is an
// integer Likert 1-5; simulated/modified pipelines hold continuous or binary
// values in the same field.
struct Evaluation {
    std::string eval_id;
    std::string text_id;
    std::string evaluator_id;
    std::string outcome;
    double value = 0.0;
};

// 0-100 rating of a latent feature (respect, uncertainty, limitations, ih).
struct LatentRating {
    std::string text_id;
    std::string rater_id;
    std::string feature;
    double value = 0.0;
};

struct Corpus {
    std::vector<TextUnit> units;
    std::vector<Evaluation> evaluations;
    std::vector<LatentRating> latent_ratings;
};

inline const std::array<std::string, 6> kOutcomeLabels = {
    "aggressive", "articulated", "enjoyable", "informative", "persuades_self", "persuades_other"};

inline const std::array<std::string, 4> kFeatureLabels = {"respect", "uncertainty", "limitations",
                                                          "ih"};

bool is_outcome_label(const std::string& s);
bool is_feature_label(const std::string& s);

// Point estimate plus inference metadata for one estimator x outcome.
struct EffectEstimate {
    std::string estimator_name;
    std::string outcome;
    double point = 0.0;
    std::optional<double> std_error;
    std::optional<double> p_value;  // present iff an inference method ran
    long n_texts = 0;
    long n_evals = 0;
    std::map<std::string, std::string> metadata;
};

}  // namespace tfx
