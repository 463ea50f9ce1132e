#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "texteffect/types.hpp"

namespace tfx {

enum class ValueMode {
    likert,   // evaluation values must be integers in [1,5]
    numeric,  // any finite value (synthetic / modified outcomes)
};

struct CorpusPaths {
    std::filesystem::path units;
    std::filesystem::path evaluations;
    std::filesystem::path ratings;
};

// Parse the three CSVs and enforce every type invariant: unique ids, one
// original per pair, edits flipping the original's treatment, referential
// integrity, label sets, value ranges. Errors name the offending row.
Corpus parse_corpus(const CorpusPaths& paths, ValueMode mode = ValueMode::likert);
Corpus parse_corpus_text(const std::string& units_csv, const std::string& evals_csv,
                         const std::string& ratings_csv, ValueMode mode = ValueMode::likert);

// Re-validate an in-memory corpus (used by pipelines that build one directly).
void validate_corpus(const Corpus& corpus, ValueMode mode);

void write_corpus(const Corpus& corpus, const CorpusPaths& paths);

struct AuditReport {
    double edits_removed_frac = 0.0;
    double originals_removed_frac = 0.0;
    std::vector<std::string> removed_text_ids;   // sorted
    std::vector<std::string> flagged_text_ids;   // texts lacking ih ratings; kept
    std::string to_json() const;
};

struct AuditOutcome {
    Corpus corpus;
    AuditReport report;
};

// Drop edits whose mean ih rating failed to move at least min_gap in the
// instructed direction (edit of a T=0 original must rate higher, of a T=1
// original lower), then drop originals left with no edits. min_gap = 0 keeps
// ties. Evaluations and ratings of removed texts are dropped with them.
AuditOutcome audit_edits(const Corpus& corpus, double min_gap = 0.0);

struct CountKey {
    std::string topic;
    int treatment = 0;
    int original = 0;
    auto operator<=>(const CountKey&) const = default;
};

using CountTable = std::map<CountKey, long>;

// Evaluation counts cross-tabulated by topic x treatment x original/edit.
CountTable summarize_counts(const Corpus& corpus);

// Mean of a latent feature per text; texts without that feature are absent.
std::map<std::string, double> mean_feature_by_text(const Corpus& corpus,
                                                   const std::string& feature);

}  // namespace tfx
