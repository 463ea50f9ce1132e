#include "texteffect/sim.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "texteffect/corpus.hpp"
#include "texteffect/design.hpp"
#include "texteffect/error.hpp"
#include "texteffect/rng.hpp"

namespace tfx {

void validate_sim_config(const SimConfig& c) {
    if (c.selection_strength < 0.0) fail(errc::config_error, "selection_strength must be >= 0");
    if (c.selection_floor <= 0.0 || c.selection_floor >= 0.5)
        fail(errc::config_error, "selection_floor must be in (0, 0.5)");
    if (c.outcome_shift < 0) fail(errc::config_error, "outcome_shift must be >= 0");
    if (c.effect_delta < 0.0) fail(errc::config_error, "effect_delta must be >= 0");
    if (c.dichotomize_threshold < 2 || c.dichotomize_threshold > 5)
        fail(errc::config_error, "dichotomize_threshold must be in [2,5]");
    if (c.n_replicas < 1) fail(errc::config_error, "n_replicas must be >= 1");
}

double selection_probability(double respect_mean, int treatment, const SimConfig& c) {
    const double sign = treatment == 1 ? 1.0 : -1.0;
    const double raw = 0.5 + c.selection_strength * sign * (respect_mean - 50.0) / 100.0;
    return std::clamp(raw, c.selection_floor, 1.0 - c.selection_floor);
}

namespace {

std::map<std::string, double> respect_means(const std::vector<LatentRating>& ratings) {
    std::map<std::string, std::pair<double, long>> acc;
    for (const LatentRating& r : ratings) {
        if (r.feature != "respect") continue;
        auto& slot = acc[r.text_id];
        slot.first += r.value;
        slot.second += 1;
    }
    std::map<std::string, double> out;
    for (const auto& [id, sn] : acc) out[id] = sn.first / static_cast<double>(sn.second);
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::set<std::string> select_filtered(const Corpus& corpus, const SimConfig& config,
                                      std::uint64_t replica_seed) {
    validate_sim_config(config);
    const auto respect = respect_means(corpus.latent_ratings);
    const Rng base(replica_seed);
    std::set<std::string> selected;
    for (const TextUnit& u : corpus.units) {
        const auto it = respect.find(u.text_id);
        if (it == respect.end())
            fail(errc::missing_rating, "text '" + u.text_id + "' has no respect rating");
        const double pi = selection_probability(it->second, u.treatment, config);
        Rng rng = base.child(hash_str(u.text_id));
        if (rng.bernoulli(pi)) selected.insert(u.text_id);
    }
    return selected;
}

std::vector<Evaluation> amplify_outcomes(const std::vector<Evaluation>& evaluations,
                                         const std::vector<LatentRating>& ratings,
                                         const SimConfig& config) {
    if (config.mode != SimMode::amplified)
        fail(errc::config_error, "amplify_outcomes requires amplified mode");
    const auto respect = respect_means(ratings);
    std::vector<double> means;
    means.reserve(respect.size());
    for (const auto& [id, m] : respect) means.push_back(m);
    const double med = median(std::move(means));

    std::vector<Evaluation> out = evaluations;
    for (Evaluation& e : out) {
        const auto it = respect.find(e.text_id);
        if (it == respect.end())
            fail(errc::missing_rating, "text '" + e.text_id + "' has no respect rating");
        const double shift = it->second >= med ? config.outcome_shift : -config.outcome_shift;
        e.value = std::clamp(e.value + shift, 1.0, 5.0);
    }
    return out;
}

std::vector<Evaluation> inject_effect(const std::vector<Evaluation>& evaluations,
                                      const std::vector<TextUnit>& units, double delta) {
    std::unordered_map<std::string, int> treatment;
    treatment.reserve(units.size());
    for (const TextUnit& u : units) treatment[u.text_id] = u.treatment;
    std::vector<Evaluation> out = evaluations;
    for (Evaluation& e : out) {
        const auto it = treatment.find(e.text_id);
        if (it == treatment.end())
            fail(errc::dangling_reference,
                 "evaluation '" + e.eval_id + "' references unknown text '" + e.text_id + "'");
        e.value += it->second == 1 ? delta : -delta;
    }
    return out;
}

std::vector<Evaluation> dichotomize(const std::vector<Evaluation>& evaluations, double threshold) {
    std::vector<Evaluation> out = evaluations;
    for (Evaluation& e : out) e.value = e.value >= threshold ? 1.0 : 0.0;
    return out;
}

double quantile_linear(std::vector<double> values, double q) {
    if (values.empty()) fail(errc::empty_input, "quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    if (lo + 1 >= values.size()) return values.back();
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

namespace {

std::vector<std::string> outcome_labels_present(const std::vector<Evaluation>& evals) {
    std::set<std::string> labels;
    for (const Evaluation& e : evals) labels.insert(e.outcome);
    return {labels.begin(), labels.end()};
}

// Outcomes pipeline shared by all replicas: amplified-mode modification plus
// dichotomization is deterministic given the corpus and config.
std::vector<Evaluation> modified_binary_evals(const Corpus& corpus, const SimConfig& config) {
    std::vector<Evaluation> evals = corpus.evaluations;
    if (config.mode == SimMode::amplified) {
        evals = amplify_outcomes(evals, corpus.latent_ratings, config);
        evals = inject_effect(evals, corpus.units, config.effect_delta);
    }
    return dichotomize(evals, config.dichotomize_threshold);
}

Replica build_replica(const Corpus& corpus, const std::vector<Evaluation>& binary_evals,
                      const std::vector<std::string>& outcomes, const SimConfig& config,
                      int replica_index) {
    Replica rep;
    rep.replica_index = replica_index;

    const std::uint64_t replica_seed =
        hash_combine(config.seed, static_cast<std::uint64_t>(replica_index));
    const auto selected = select_filtered(corpus, config, replica_seed);
    rep.selected_text_ids.assign(selected.begin(), selected.end());

    // Ground-truth frame: every pair with at least one selected edit keeps all
    // its selected edits and gets its original back even if filtered out.
    std::set<std::string> truth_texts;
    std::unordered_map<std::string, const TextUnit*> original_of_pair;
    for (const TextUnit& u : corpus.units)
        if (u.is_original()) original_of_pair[u.pair_id] = &u;
    for (const TextUnit& u : corpus.units) {
        if (u.is_original() || !selected.count(u.text_id)) continue;
        truth_texts.insert(u.text_id);
        truth_texts.insert(original_of_pair.at(u.pair_id)->text_id);
    }

    Corpus frame;
    for (const TextUnit& u : corpus.units)
        if (truth_texts.count(u.text_id)) frame.units.push_back(u);
    for (const Evaluation& e : binary_evals)
        if (truth_texts.count(e.text_id)) frame.evaluations.push_back(e);

    for (const std::string& outcome : outcomes) {
        const auto groups = build_groups(frame, outcome);
        if (groups.empty()) continue;
        rep.ground_truth[outcome] = tau_t_point(groups);
        rep.ground_truth_pairs[outcome] = static_cast<long>(groups.size());
    }

    // Observational view: selected texts with per-text mean binary outcomes.
    std::unordered_map<std::string, std::map<std::string, std::pair<double, long>>> acc;
    for (const Evaluation& e : binary_evals) {
        if (!selected.count(e.text_id)) continue;
        auto& slot = acc[e.text_id][e.outcome];
        slot.first += e.value;
        slot.second += 1;
    }
    for (const TextUnit& u : corpus.units) {
        if (!selected.count(u.text_id)) continue;
        ViewRow row;
        row.text_id = u.text_id;
        row.treatment = u.treatment;
        row.topic = u.topic;
        row.body = u.body;
        const auto it = acc.find(u.text_id);
        if (it != acc.end())
            for (const auto& [outcome, sn] : it->second)
                row.outcomes[outcome] = sn.first / static_cast<double>(sn.second);
        rep.view.push_back(std::move(row));
    }
    return rep;
}

}  // namespace

Replica generate_replica(const Corpus& corpus, const SimConfig& config, int replica_index) {
    validate_sim_config(config);
    const auto binary_evals = modified_binary_evals(corpus, config);
    return build_replica(corpus, binary_evals, outcome_labels_present(binary_evals), config,
                         replica_index);
}

SimRun generate_replicas(const Corpus& corpus, const SimConfig& config) {
    validate_sim_config(config);
    const auto binary_evals = modified_binary_evals(corpus, config);

    SimRun run;
    run.outcomes = outcome_labels_present(binary_evals);

    Corpus full = corpus;
    full.evaluations = binary_evals;
    for (const std::string& outcome : run.outcomes) {
        const auto groups = build_groups(full, outcome);
        if (!groups.empty()) run.population_truth[outcome] = tau_t_point(groups);
    }

    run.replicas.reserve(config.n_replicas);
    for (int r = 0; r < config.n_replicas; ++r)
        run.replicas.push_back(build_replica(corpus, binary_evals, run.outcomes, config, r));

    for (const std::string& outcome : run.outcomes) {
        std::vector<double> truths;
        truths.reserve(run.replicas.size());
        for (const Replica& rep : run.replicas) {
            const auto it = rep.ground_truth.find(outcome);
            if (it != rep.ground_truth.end()) truths.push_back(it->second);
        }
        if (truths.empty()) continue;
        run.bands[outcome] = Band{quantile_linear(truths, 0.025), quantile_linear(truths, 0.975)};
    }
    return run;
}

}  // namespace tfx
