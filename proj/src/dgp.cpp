#include "texteffect/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "texteffect/error.hpp"
#include "texteffect/rng.hpp"

namespace tfx {

namespace {

std::string zero_pad(long v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

long grid_units(double value, double step, const std::string& name) {
    const double raw = value / step;
    const long units = std::lround(raw);
    if (std::abs(raw - static_cast<double>(units)) > 1e-9)
        fail(errc::config_error,
             name + " (" + std::to_string(value) + ") must be a multiple of z_resolution (" +
                 std::to_string(step) + ")");
    return units;
}

void validate(const DgpParams& p) {
    if (p.n_pairs < 1) fail(errc::config_error, "n_pairs must be >= 1");
    if (p.p_treat <= 0.0 || p.p_treat >= 1.0) fail(errc::config_error, "p_treat must be in (0,1)");
    if (p.noise_sd < 0.0) fail(errc::config_error, "noise_sd must be >= 0");
    if (p.z_resolution <= 0.0) fail(errc::config_error, "z_resolution must be > 0");
    if (p.z_jitter < 0.0) fail(errc::config_error, "z_jitter must be >= 0");
    if (p.z_shift < 0.0) fail(errc::config_error, "z_shift must be >= 0");
    if (p.min_edits < 1 || p.max_edits < p.min_edits)
        fail(errc::config_error, "edit counts must satisfy 1 <= min_edits <= max_edits");
    if (p.marker_count < 1) fail(errc::config_error, "marker_count must be >= 1");
    if (p.tokens_per_doc < 1) fail(errc::config_error, "tokens_per_doc must be >= 1");
}

}  // namespace

VocabSets effective_vocab(const DgpParams& p) {
    VocabSets v = p.vocab;
    if (v.treatment_markers.empty()) {
        v.treatment_markers.reserve(p.n_pairs);
        for (long i = 0; i < p.n_pairs; ++i) v.treatment_markers.push_back("tmk" + zero_pad(i, 5));
    }
    if (v.confounder_markers.empty())
        for (int i = 0; i < 8; ++i) v.confounder_markers.push_back("cmk" + std::to_string(i));
    if (v.filler.empty())
        for (int i = 0; i < 200; ++i) v.filler.push_back("w" + zero_pad(i, 3));

    std::set<std::string> seen;
    for (const auto* set : {&v.treatment_markers, &v.confounder_markers, &v.filler}) {
        if (set->empty()) fail(errc::config_error, "vocab sets must be non-empty");
        for (const auto& tok : *set)
            if (!seen.insert(tok).second)
                fail(errc::config_error, "vocab sets must be disjoint; duplicate token '" + tok +
                                             "'");
    }
    return v;
}

DgpTruth true_effects(const DgpParams& p) {
    validate(p);
    return DgpTruth{p.tau, p.tau + p.beta * p.z_shift};
}

namespace {

std::string compose_body(const VocabSets& vocab, std::size_t marker_index, int treatment,
                         long z_units, int marker_count, int tokens_per_doc, Rng rng) {
    std::vector<std::string> tokens;
    if (treatment == 1)
        for (int k = 0; k < marker_count; ++k)
            tokens.push_back(vocab.treatment_markers[marker_index]);
    for (long k = 0; k < z_units; ++k)
        tokens.push_back(vocab.confounder_markers[static_cast<std::size_t>(k) %
                                                  vocab.confounder_markers.size()]);
    while (static_cast<int>(tokens.size()) < tokens_per_doc)
        tokens.push_back(vocab.filler[rng.bounded(vocab.filler.size())]);
    rng.shuffle(tokens);
    std::string body;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) body += ' ';
        body += tokens[i];
    }
    return body;
}

}  // namespace

Decoded decode_tokens(const std::string& body, const VocabSets& vocab, double z_resolution) {
    std::set<std::string> markers(vocab.treatment_markers.begin(),
                                  vocab.treatment_markers.end());
    std::set<std::string> confounders(vocab.confounder_markers.begin(),
                                      vocab.confounder_markers.end());
    Decoded out;
    long z_units = 0;
    std::size_t pos = 0;
    while (pos < body.size()) {
        std::size_t end = body.find(' ', pos);
        if (end == std::string::npos) end = body.size();
        const std::string tok = body.substr(pos, end - pos);
        if (markers.count(tok)) out.treatment = 1;
        else if (confounders.count(tok)) ++z_units;
        pos = end + 1;
    }
    out.z = static_cast<double>(z_units) * z_resolution;
    return out;
}

DgpDataset sample_dataset(const DgpParams& p) {
    validate(p);
    const VocabSets vocab = effective_vocab(p);
    const long shift_units = grid_units(p.z_shift, p.z_resolution, "z_shift");
    const long jitter_units = grid_units(p.z_jitter, p.z_resolution, "z_jitter");
    const double z_max = p.z_shift + p.z_jitter;

    DgpDataset ds;
    ds.vocab = vocab;
    ds.truth = true_effects(p);

    const Rng master(p.seed);
    const std::array<std::string, 3> topics = {"climate", "guns", "immigration"};

    long eval_counter = 0;
    for (long i = 0; i < p.n_pairs; ++i) {
        Rng rng = master.child(static_cast<std::uint64_t>(i));
        const int d = rng.bernoulli(p.p_treat) ? 1 : 0;
        const long z_units =
            shift_units * d + static_cast<long>(rng.bounded(static_cast<std::uint64_t>(
                                  jitter_units + 1)));
        const double z = static_cast<double>(z_units) * p.z_resolution;
        const int n_edits =
            p.min_edits +
            static_cast<int>(rng.bounded(static_cast<std::uint64_t>(p.max_edits - p.min_edits + 1)));

        const std::string pair_id = "p" + zero_pad(i, 5);
        const std::string topic = topics[static_cast<std::size_t>(i) % topics.size()];
        const std::size_t marker_index =
            static_cast<std::size_t>(i) % vocab.treatment_markers.size();

        for (int j = 1; j <= 1 + n_edits; ++j) {
            // j = 1 is the original with T = D; edits flip T and keep Z.
            const int treatment = j == 1 ? d : 1 - d;
            TextUnit u;
            u.text_id = pair_id + "v" + std::to_string(j);
            u.pair_id = pair_id;
            u.version_index = j;
            u.treatment = treatment;
            u.topic = topic;
            u.body = compose_body(vocab, marker_index, treatment, z_units, p.marker_count,
                                  p.tokens_per_doc, rng.child(1000 + j));

            const double y = p.alpha + p.tau * treatment + p.beta * z +
                             p.noise_sd * rng.child(2000 + j).normal();

            Evaluation e;
            e.eval_id = "e" + zero_pad(eval_counter++, 7);
            e.text_id = u.text_id;
            e.evaluator_id = "v" + u.text_id;
            e.outcome = p.outcome_label;
            e.value = y;

            LatentRating respect;
            respect.text_id = u.text_id;
            respect.rater_id = "sim";
            respect.feature = "respect";
            respect.value = z_max > 0.0 ? std::clamp(100.0 * z / z_max, 0.0, 100.0) : 50.0;

            LatentRating ih;
            ih.text_id = u.text_id;
            ih.rater_id = "sim";
            ih.feature = "ih";
            ih.value = treatment == 1 ? 80.0 : 20.0;

            ds.hidden.push_back({u.text_id, d, treatment, z});
            ds.corpus.units.push_back(std::move(u));
            ds.corpus.evaluations.push_back(std::move(e));
            ds.corpus.latent_ratings.push_back(respect);
            ds.corpus.latent_ratings.push_back(ih);
        }
    }
    return ds;
}

}  // namespace tfx
