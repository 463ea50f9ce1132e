#pragma once

#include <string>
#include <vector>

#include "texteffect/design.hpp"
#include "texteffect/types.hpp"

namespace tfx::test {

// Compact corpus builder for unit tests.
struct CorpusBuilder {
    Corpus corpus;
    long eval_counter = 0;

    CorpusBuilder& unit(const std::string& text_id, const std::string& pair_id, int version,
                        int treatment, const std::string& topic = "climate",
                        const std::string& body = "some words here") {
        corpus.units.push_back({text_id, pair_id, version, treatment, topic, body});
        return *this;
    }

    CorpusBuilder& eval(const std::string& text_id, double value,
                        const std::string& outcome = "aggressive",
                        const std::string& evaluator = "") {
        Evaluation e;
        e.eval_id = "e" + std::to_string(eval_counter++);
        e.text_id = text_id;
        e.evaluator_id = evaluator.empty() ? "rater" + std::to_string(eval_counter) : evaluator;
        e.outcome = outcome;
        e.value = value;
        corpus.evaluations.push_back(std::move(e));
        return *this;
    }

    CorpusBuilder& rating(const std::string& text_id, const std::string& feature, double value,
                          const std::string& rater = "r1") {
        corpus.latent_ratings.push_back({text_id, rater, feature, value});
        return *this;
    }
};

// Independent oracle for the paired estimator: literal per-pair arm means of
// text-level means, averaged over pairs. Kept separate from the library path.
inline double oracle_tau_t(const std::vector<DesignGroup>& groups) {
    double total = 0.0;
    for (const DesignGroup& g : groups) {
        double s1 = 0.0, s0 = 0.0;
        double n1 = 0.0, n0 = 0.0;
        for (const GroupRow& r : g.rows) {
            double m = 0.0;
            for (const EvalObs& o : r.evals) m += o.value;
            m /= static_cast<double>(r.evals.size());
            if (r.treatment == 1) {
                s1 += m;
                n1 += 1.0;
            } else {
                s0 += m;
                n0 += 1.0;
            }
        }
        total += s1 / n1 - s0 / n0;
    }
    return total / static_cast<double>(groups.size());
}

// Bare two-version group from numbers: first value treated, second control.
inline DesignGroup group2(const std::string& pair_id, double treated_mean, double control_mean) {
    DesignGroup g;
    g.pair_id = pair_id;
    g.rows.push_back({pair_id + "_t", 1, {{treated_mean, "v1"}}, treated_mean});
    g.rows.push_back({pair_id + "_c", 0, {{control_mean, "v2"}}, control_mean});
    return g;
}

}  // namespace tfx::test
