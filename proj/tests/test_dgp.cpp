#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "texteffect/corpus.hpp"
#include "texteffect/design.hpp"
#include "texteffect/dgp.hpp"
#include "texteffect/error.hpp"

using namespace tfx;

TEST_CASE("true_effects closed form") {
    DgpParams p;
    p.tau = 0.5;
    p.beta = 1.0;
    p.z_shift = 0.3;
    const DgpTruth t = true_effects(p);
    CHECK(t.tau_t == doctest::Approx(0.5));
    CHECK(t.tau_d == doctest::Approx(0.8));

    p.beta = 0.0;
    CHECK(true_effects(p).tau_d == doctest::Approx(true_effects(p).tau_t));
    p.beta = 1.0;
    p.z_shift = 0.0;
    CHECK(true_effects(p).tau_d == doctest::Approx(true_effects(p).tau_t));
}

TEST_CASE("decode after encode is the identity") {
    DgpParams p;
    p.n_pairs = 40;
    p.min_edits = 1;
    p.max_edits = 3;
    p.seed = 11;
    const DgpDataset ds = sample_dataset(p);
    validate_corpus(ds.corpus, ValueMode::numeric);

    std::map<std::string, const HiddenRecord*> hidden;
    for (const auto& h : ds.hidden) hidden[h.text_id] = &h;
    for (const TextUnit& u : ds.corpus.units) {
        const Decoded d = decode_tokens(u.body, ds.vocab, p.z_resolution);
        const HiddenRecord* h = hidden.at(u.text_id);
        REQUIRE(d.treatment == h->treatment);
        REQUIRE(d.treatment == u.treatment);
        REQUIRE(d.z == h->z);  // bit-exact: Z lives on the grid
    }
}

TEST_CASE("edits flip treatment and preserve the latent feature") {
    DgpParams p;
    p.n_pairs = 30;
    p.max_edits = 3;
    p.seed = 4;
    const DgpDataset ds = sample_dataset(p);
    std::map<std::string, const HiddenRecord*> hidden;
    for (const auto& h : ds.hidden) hidden[h.text_id] = &h;
    std::map<std::string, const TextUnit*> originals;
    for (const TextUnit& u : ds.corpus.units)
        if (u.is_original()) originals[u.pair_id] = &u;
    for (const TextUnit& u : ds.corpus.units) {
        if (u.is_original()) continue;
        const TextUnit* orig = originals.at(u.pair_id);
        CHECK(u.treatment == 1 - orig->treatment);
        CHECK(hidden.at(u.text_id)->z == hidden.at(orig->text_id)->z);
    }
}

TEST_CASE("no two documents share token counts while differing in treatment") {
    DgpParams p;
    p.n_pairs = 25;
    p.max_edits = 2;
    p.seed = 9;
    const DgpDataset ds = sample_dataset(p);

    auto count_map = [](const std::string& body) {
        std::map<std::string, long> counts;
        std::size_t pos = 0;
        while (pos < body.size()) {
            std::size_t end = body.find(' ', pos);
            if (end == std::string::npos) end = body.size();
            counts[body.substr(pos, end - pos)] += 1;
            pos = end + 1;
        }
        return counts;
    };

    std::vector<std::map<std::string, long>> maps;
    maps.reserve(ds.corpus.units.size());
    for (const TextUnit& u : ds.corpus.units) maps.push_back(count_map(u.body));
    for (std::size_t i = 0; i < maps.size(); ++i)
        for (std::size_t j = i + 1; j < maps.size(); ++j)
            if (ds.corpus.units[i].treatment != ds.corpus.units[j].treatment)
                REQUIRE(maps[i] != maps[j]);
}

TEST_CASE("null dgp estimates near zero; defaults recover tau and tau_d") {
    SUBCASE("null") {
        DgpParams p;
        p.tau = 0.0;
        p.beta = 0.0;
        p.n_pairs = 400;
        p.noise_sd = 0.3;
        p.seed = 21;
        const DgpDataset ds = sample_dataset(p);
        const auto groups = build_groups(ds.corpus, p.outcome_label);
        CHECK(std::abs(tau_t_point(groups)) < 0.1);
        std::vector<TextUnit> originals;
        for (const auto& u : ds.corpus.units)
            if (u.is_original()) originals.push_back(u);
        CHECK(std::abs(tau_d_hat(originals, ds.corpus.evaluations, p.outcome_label).point) < 0.2);
    }
    SUBCASE("noiseless recovers exactly") {
        DgpParams p;
        p.noise_sd = 0.0;
        p.n_pairs = 200;
        p.seed = 5;
        const DgpDataset ds = sample_dataset(p);
        const auto groups = build_groups(ds.corpus, p.outcome_label);
        // Per pair: Y(T=1) - Y(T=0) = tau exactly when noise is off.
        CHECK(tau_t_point(groups) == doctest::Approx(p.tau).epsilon(1e-12));
    }
}

TEST_CASE("renaming marker tokens leaves estimates unchanged") {
    DgpParams p;
    p.n_pairs = 60;
    p.seed = 33;
    const DgpDataset a = sample_dataset(p);

    DgpParams q = p;
    q.vocab = effective_vocab(p);
    for (auto& tok : q.vocab.treatment_markers) tok = "XX" + tok;
    for (auto& tok : q.vocab.confounder_markers) tok = "YY" + tok;
    const DgpDataset b = sample_dataset(q);

    const double ta = tau_t_point(build_groups(a.corpus, p.outcome_label));
    const double tb = tau_t_point(build_groups(b.corpus, p.outcome_label));
    CHECK(ta == doctest::Approx(tb).epsilon(1e-12));
}

TEST_CASE("dgp is reproducible from its seed") {
    DgpParams p;
    p.n_pairs = 15;
    p.seed = 77;
    const DgpDataset a = sample_dataset(p);
    const DgpDataset b = sample_dataset(p);
    REQUIRE(a.corpus.units.size() == b.corpus.units.size());
    for (std::size_t i = 0; i < a.corpus.units.size(); ++i)
        CHECK(a.corpus.units[i].body == b.corpus.units[i].body);
    for (std::size_t i = 0; i < a.corpus.evaluations.size(); ++i)
        CHECK(a.corpus.evaluations[i].value == b.corpus.evaluations[i].value);
}

TEST_CASE("dgp validates its parameters") {
    DgpParams p;
    p.z_shift = 0.013;  // not on the grid
    CHECK_THROWS_AS(sample_dataset(p), Error);
    p = DgpParams{};
    p.p_treat = 1.5;
    CHECK_THROWS_AS(sample_dataset(p), Error);
    p = DgpParams{};
    p.vocab.treatment_markers = {"dup"};
    p.vocab.confounder_markers = {"dup"};
    p.vocab.filler = {"w"};
    CHECK_THROWS_AS(sample_dataset(p), Error);
}
