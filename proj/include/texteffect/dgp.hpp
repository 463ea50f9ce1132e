#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "texteffect/types.hpp"

namespace tfx {

struct VocabSets {
    std::vector<std::string> treatment_markers;
    std::vector<std::string> confounder_markers;
    std::vector<std::string> filler;
};

// Synthetic generator of the label -> words -> {treatment, latent feature} ->
// outcome chain, with analytic effects. Documents encode (T, Z) exactly in
// token counts: a per-pair treatment-marker token is present iff T = 1, and
// the total confounder-marker count equals Z / z_resolution. Z lives on a
// grid so that decoding tokens reproduces the generating values bit-exactly.
struct DgpParams {
    long n_pairs = 200;
    double p_treat = 0.5;       // P(D = 1)
    double z_shift = 0.3;       // E[Z | D=1] - E[Z | D=0]
    double tau = 0.5;           // structural treatment effect
    double beta = 1.0;          // Z -> Y coefficient
    double alpha = 2.4;         // intercept
    double noise_sd = 0.5;
    double z_jitter = 1.0;      // width of the uniform jitter on Z
    double z_resolution = 0.02; // grid step; z_shift and z_jitter must be multiples
    int min_edits = 1;
    int max_edits = 1;
    int tokens_per_doc = 90;
    int marker_count = 3;       // treatment-marker tokens per treated doc
    std::string outcome_label = "informative";
    VocabSets vocab;            // empty sets are auto-generated
    std::uint64_t seed = 0;
};

struct DgpTruth {
    double tau_t = 0.0;
    double tau_d = 0.0;
};

struct HiddenRecord {
    std::string text_id;
    int d_label = 0;  // pair's document label D
    int treatment = 0;
    double z = 0.0;
};

struct DgpDataset {
    Corpus corpus;
    DgpTruth truth;
    std::vector<HiddenRecord> hidden;
    VocabSets vocab;
};

DgpTruth true_effects(const DgpParams& params);

DgpDataset sample_dataset(const DgpParams& params);

// Recover (T, Z) from a document body. Exact inverse of the emission.
struct Decoded {
    int treatment = 0;
    double z = 0.0;
};
Decoded decode_tokens(const std::string& body, const VocabSets& vocab, double z_resolution);

// The vocabulary actually used for given params (auto-generation applied).
VocabSets effective_vocab(const DgpParams& params);

}  // namespace tfx
