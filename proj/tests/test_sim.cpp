#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "texteffect/design.hpp"
#include "texteffect/dgp.hpp"
#include "texteffect/error.hpp"
#include "texteffect/sim.hpp"

using namespace tfx;
using tfx::test::CorpusBuilder;

namespace {

SimConfig amplified_config() {
    SimConfig c;
    c.mode = SimMode::amplified;
    c.selection_strength = 0.8;
    c.selection_floor = 0.05;
    c.outcome_shift = 1;
    c.effect_delta = 0.6;
    c.dichotomize_threshold = 4;
    c.n_replicas = 10;
    c.seed = 42;
    return c;
}

Corpus dgp_corpus(long n_pairs, std::uint64_t seed, int max_edits = 2) {
    DgpParams p;
    p.n_pairs = n_pairs;
    p.max_edits = max_edits;
    p.alpha = 2.8;
    p.noise_sd = 0.6;
    p.seed = seed;
    return sample_dataset(p).corpus;
}

}  // namespace

TEST_CASE("selection probability formula") {
    SimConfig c = amplified_config();
    SUBCASE("zero strength gives 0.5 everywhere") {
        c.selection_strength = 0.0;
        CHECK(selection_probability(0, 0, c) == doctest::Approx(0.5));
        CHECK(selection_probability(100, 1, c) == doctest::Approx(0.5));
    }
    SUBCASE("treated respectful over-selected, clamped") {
        CHECK(selection_probability(100, 1, c) == doctest::Approx(0.9));   // min(0.9, 1-eps)
        CHECK(selection_probability(100, 0, c) == doctest::Approx(0.1));   // max(0.1, eps)
        CHECK(selection_probability(50, 1, c) == doctest::Approx(0.5));
    }
    SUBCASE("floor keeps positivity for any strength") {
        c.selection_strength = 10.0;
        for (double r : {0.0, 25.0, 50.0, 75.0, 100.0})
            for (int t : {0, 1}) {
                const double pi = selection_probability(r, t, c);
                CHECK(pi >= c.selection_floor);
                CHECK(pi <= 1.0 - c.selection_floor);
            }
    }
}

TEST_CASE("amplify shifts by the respect median split and clips") {
    Corpus c = CorpusBuilder{}
                   .unit("a", "p1", 1, 1)
                   .unit("b", "p1", 2, 0)
                   .rating("a", "respect", 80)
                   .rating("b", "respect", 20)
                   .eval("a", 5)
                   .eval("b", 3)
                   .corpus;
    SimConfig cfg = amplified_config();

    SUBCASE("zero shift is the identity") {
        cfg.outcome_shift = 0;
        const auto out = amplify_outcomes(c.evaluations, c.latent_ratings, cfg);
        CHECK(out[0].value == 5);
        CHECK(out[1].value == 3);
    }
    SUBCASE("boundary clip and downward shift") {
        cfg.outcome_shift = 1;
        const auto out = amplify_outcomes(c.evaluations, c.latent_ratings, cfg);
        CHECK(out[0].value == 5);  // 5 + 1 clipped
        CHECK(out[1].value == 2);  // 3 - 1
    }
    SUBCASE("baseline mode refuses") {
        cfg.mode = SimMode::baseline;
        CHECK_THROWS_AS(amplify_outcomes(c.evaluations, c.latent_ratings, cfg), Error);
    }
}

TEST_CASE("inject_effect moves arms apart without clipping") {
    Corpus c = CorpusBuilder{}
                   .unit("a", "p1", 1, 1)
                   .unit("b", "p1", 2, 0)
                   .eval("a", 3.0)
                   .eval("b", 3.0)
                   .corpus;
    SUBCASE("delta zero is the identity") {
        const auto out = inject_effect(c.evaluations, c.units, 0.0);
        CHECK(out[0].value == 3.0);
        CHECK(out[1].value == 3.0);
    }
    SUBCASE("direct rule") {
        const auto out = inject_effect(c.evaluations, c.units, 0.6);
        CHECK(out[0].value == doctest::Approx(3.6));
        CHECK(out[1].value == doctest::Approx(2.4));
    }
}

TEST_CASE("dichotomize thresholds") {
    Corpus c = CorpusBuilder{}.unit("a", "p1", 1, 1).unit("b", "p1", 2, 0).corpus;
    CorpusBuilder b;
    b.corpus = c;
    b.eval("a", 4.0).eval("a", 3.6).eval("b", 5.0);
    const auto out = dichotomize(b.corpus.evaluations, 4);
    CHECK(out[0].value == 1.0);  // boundary counts as 1
    CHECK(out[1].value == 0.0);
    CHECK(out[2].value == 1.0);
}

TEST_CASE("select_filtered needs respect ratings and respects the formula") {
    Corpus c = CorpusBuilder{}.unit("a", "p1", 1, 1).unit("b", "p1", 2, 0).corpus;
    SimConfig cfg = amplified_config();
    CHECK_THROWS_AS(select_filtered(c, cfg, 1), Error);

    // With kappa = 0 selection is a fair coin; over many replicas roughly half
    // of the texts appear.
    Corpus big = dgp_corpus(150, 8);
    cfg.selection_strength = 0.0;
    long total = 0, n_draws = 40;
    std::size_t n_texts = big.units.size();
    for (long r = 0; r < n_draws; ++r)
        total += static_cast<long>(select_filtered(big, cfg, 1000 + r).size());
    const double frac = static_cast<double>(total) / static_cast<double>(n_draws * n_texts);
    CHECK(frac > 0.45);
    CHECK(frac < 0.55);
}

TEST_CASE("selection is reproducible and order-independent") {
    Corpus c = dgp_corpus(50, 14);
    const SimConfig cfg = amplified_config();
    const auto a = select_filtered(c, cfg, 99);
    const auto b = select_filtered(c, cfg, 99);
    CHECK(a == b);

    Corpus shuffled = c;
    std::reverse(shuffled.units.begin(), shuffled.units.end());
    CHECK(select_filtered(shuffled, cfg, 99) == a);
}

TEST_CASE("replicas are exactly reproducible from (seed, index)") {
    const Corpus corpus = dgp_corpus(60, 3);
    const SimConfig cfg = amplified_config();
    const Replica a = generate_replica(corpus, cfg, 4);
    const Replica b = generate_replica(corpus, cfg, 4);
    CHECK(a.selected_text_ids == b.selected_text_ids);
    CHECK(a.ground_truth == b.ground_truth);
    const Replica c2 = generate_replica(corpus, cfg, 5);
    CHECK(a.selected_text_ids != c2.selected_text_ids);
}

TEST_CASE("ground truth restores originals filtered from the view") {
    const Corpus corpus = dgp_corpus(80, 7);
    const SimConfig cfg = amplified_config();
    const Replica rep = generate_replica(corpus, cfg, 0);

    const std::set<std::string> selected(rep.selected_text_ids.begin(),
                                         rep.selected_text_ids.end());
    // Some pair must have a selected edit with an unselected original for the
    // restoration to matter; with these sizes that always happens.
    std::map<std::string, const TextUnit*> originals;
    for (const TextUnit& u : corpus.units)
        if (u.is_original()) originals[u.pair_id] = &u;
    bool restored_case = false;
    for (const TextUnit& u : corpus.units)
        if (!u.is_original() && selected.count(u.text_id) &&
            !selected.count(originals.at(u.pair_id)->text_id))
            restored_case = true;
    CHECK(restored_case);
    CHECK_FALSE(rep.ground_truth.empty());
    for (const auto& [outcome, pairs] : rep.ground_truth_pairs) CHECK(pairs > 0);
}

TEST_CASE("select_filtered does not mutate its inputs; truth on full data is stable") {
    const Corpus corpus = dgp_corpus(40, 21);
    SimConfig cfg = amplified_config();

    Corpus modified = corpus;
    auto evals = amplify_outcomes(corpus.evaluations, corpus.latent_ratings, cfg);
    evals = inject_effect(evals, corpus.units, cfg.effect_delta);
    modified.evaluations = dichotomize(evals, cfg.dichotomize_threshold);

    const auto groups_before = build_groups(modified, "informative");
    const double truth_before = tau_t_point(groups_before);
    (void)select_filtered(corpus, cfg, 123);
    const auto groups_after = build_groups(modified, "informative");
    CHECK(tau_t_point(groups_after) == doctest::Approx(truth_before).epsilon(1e-15));
}

TEST_CASE("generate_replicas produces bands and a biased naive view under confounding") {
    const Corpus corpus = dgp_corpus(120, 19, 3);
    SimConfig cfg = amplified_config();
    cfg.n_replicas = 30;
    const SimRun run = generate_replicas(corpus, cfg);

    REQUIRE(run.replicas.size() == 30);
    REQUIRE(run.bands.count("informative"));
    const Band band = run.bands.at("informative");
    CHECK(band.lo <= band.hi);
    // delta > 0 pushes the binary effect above zero: band excludes 0.
    CHECK(band.lo > 0.0);

    // The filtered-view difference in means is biased away from the truth:
    // |mean gap| exceeds 3 MC standard errors across replicas.
    std::vector<double> gaps;
    for (const Replica& rep : run.replicas) {
        double s1 = 0, s0 = 0;
        long n1 = 0, n0 = 0;
        for (const ViewRow& row : rep.view) {
            const auto it = row.outcomes.find("informative");
            if (it == row.outcomes.end()) continue;
            if (row.treatment == 1) {
                s1 += it->second;
                ++n1;
            } else {
                s0 += it->second;
                ++n0;
            }
        }
        REQUIRE(n1 > 0);
        REQUIRE(n0 > 0);
        gaps.push_back(s1 / n1 - s0 / n0 - rep.ground_truth.at("informative"));
    }
    double mean_gap = 0.0;
    for (double g : gaps) mean_gap += g;
    mean_gap /= static_cast<double>(gaps.size());
    double var = 0.0;
    for (double g : gaps) var += (g - mean_gap) * (g - mean_gap);
    var /= static_cast<double>(gaps.size() - 1);
    const double mc_se = std::sqrt(var / static_cast<double>(gaps.size()));
    CHECK(std::abs(mean_gap) > 3.0 * mc_se);
}

TEST_CASE("passthrough replica: view is about half the corpus, truth near the full-data value") {
    const Corpus corpus = dgp_corpus(150, 25);
    SimConfig cfg;
    cfg.mode = SimMode::baseline;
    cfg.selection_strength = 0.0;
    cfg.n_replicas = 1;
    cfg.seed = 9;
    const SimRun run = generate_replicas(corpus, cfg);
    REQUIRE(run.replicas.size() == 1);
    const Replica& rep = run.replicas[0];
    const double frac =
        static_cast<double>(rep.view.size()) / static_cast<double>(corpus.units.size());
    CHECK(frac > 0.4);
    CHECK(frac < 0.6);

    // With selection at a fair coin the replica's paired estimate targets the
    // same quantity as the full dichotomized data.
    REQUIRE(run.population_truth.count("informative"));
    CHECK(rep.ground_truth.at("informative") ==
          doctest::Approx(run.population_truth.at("informative")).epsilon(0.5));
}

TEST_CASE("sim config validation") {
    SimConfig cfg = amplified_config();
    cfg.selection_floor = 0.0;
    CHECK_THROWS_AS(validate_sim_config(cfg), Error);
    cfg = amplified_config();
    cfg.selection_floor = 0.5;
    CHECK_THROWS_AS(validate_sim_config(cfg), Error);
    cfg = amplified_config();
    cfg.dichotomize_threshold = 1;
    CHECK_THROWS_AS(validate_sim_config(cfg), Error);
    cfg = amplified_config();
    cfg.n_replicas = 0;
    CHECK_THROWS_AS(validate_sim_config(cfg), Error);
}
