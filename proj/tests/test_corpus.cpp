#include <algorithm>
#include <map>

#include "doctest.h"
#include "helpers.hpp"
#include "texteffect/corpus.hpp"
#include "texteffect/error.hpp"

using namespace tfx;
using tfx::test::CorpusBuilder;

namespace {

Corpus minimal_pair() {
    // One pair, J = 3: original treated plus two control edits.
    return CorpusBuilder{}
        .unit("t1", "p1", 1, 1)
        .unit("t2", "p1", 2, 0)
        .unit("t3", "p1", 3, 0)
        .corpus;
}

}  // namespace

TEST_CASE("parse_corpus accepts a minimal valid pair") {
    const std::string units =
        "text_id,pair_id,version_index,treatment,topic,body\n"
        "t1,p1,1,1,climate,words one\n"
        "t2,p1,2,0,climate,words two\n"
        "t3,p1,3,0,climate,words three\n";
    const std::string evals =
        "eval_id,text_id,evaluator_id,outcome,value\n"
        "e1,t1,v1,aggressive,3\n"
        "e2,t2,v1,aggressive,2\n";
    const std::string ratings =
        "text_id,rater_id,feature,value\n"
        "t1,r1,ih,80\n";
    const Corpus c = parse_corpus_text(units, evals, ratings);
    CHECK(c.units.size() == 3);
    CHECK(c.evaluations.size() == 2);
    std::size_t originals = 0;
    for (const auto& u : c.units) originals += u.is_original();
    CHECK(originals == 1);
}

TEST_CASE("parse_corpus rejects an edit whose treatment does not flip") {
    const std::string units =
        "text_id,pair_id,version_index,treatment,topic,body\n"
        "t1,p1,1,1,climate,a\n"
        "t2,p1,2,1,climate,b\n";
    CHECK_THROWS_WITH_AS(
        parse_corpus_text(units, "eval_id,text_id,evaluator_id,outcome,value\n",
                          "text_id,rater_id,feature,value\n"),
        doctest::Contains("does not flip"), Error);
}

TEST_CASE("parse_corpus names structural problems") {
    const std::string good_units =
        "text_id,pair_id,version_index,treatment,topic,body\n"
        "t1,p1,1,1,climate,a\n"
        "t2,p1,2,0,climate,b\n";
    const std::string no_evals = "eval_id,text_id,evaluator_id,outcome,value\n";
    const std::string no_ratings = "text_id,rater_id,feature,value\n";

    SUBCASE("missing column") {
        const std::string bad = "text_id,pair_id,version_index,treatment,topic\nt1,p1,1,1,c\n";
        try {
            parse_corpus_text(bad, no_evals, no_ratings);
            FAIL("expected missing_column");
        } catch (const Error& e) {
            CHECK(e.code() == errc::missing_column);
        }
    }
    SUBCASE("duplicate text id") {
        const std::string bad =
            "text_id,pair_id,version_index,treatment,topic,body\n"
            "t1,p1,1,1,c,a\n"
            "t1,p2,1,1,c,b\n";
        try {
            parse_corpus_text(bad, no_evals, no_ratings);
            FAIL("expected duplicate_id");
        } catch (const Error& e) {
            CHECK(e.code() == errc::duplicate_id);
        }
    }
    SUBCASE("dangling evaluation reference") {
        const std::string bad_evals =
            "eval_id,text_id,evaluator_id,outcome,value\ne1,ghost,v1,aggressive,3\n";
        try {
            parse_corpus_text(good_units, bad_evals, no_ratings);
            FAIL("expected dangling_reference");
        } catch (const Error& e) {
            CHECK(e.code() == errc::dangling_reference);
        }
    }
    SUBCASE("likert range enforced") {
        const std::string bad_evals =
            "eval_id,text_id,evaluator_id,outcome,value\ne1,t1,v1,aggressive,6\n";
        CHECK_THROWS_AS(parse_corpus_text(good_units, bad_evals, no_ratings), Error);
        // numeric mode accepts continuous values
        const std::string cont =
            "eval_id,text_id,evaluator_id,outcome,value\ne1,t1,v1,aggressive,3.7\n";
        CHECK_NOTHROW(parse_corpus_text(good_units, cont, no_ratings, ValueMode::numeric));
        CHECK_THROWS_AS(parse_corpus_text(good_units, cont, no_ratings, ValueMode::likert),
                        Error);
    }
    SUBCASE("pair without an original") {
        const std::string bad =
            "text_id,pair_id,version_index,treatment,topic,body\n"
            "t2,p1,2,0,c,b\n";
        try {
            parse_corpus_text(bad, no_evals, no_ratings);
            FAIL("expected invariant_violation");
        } catch (const Error& e) {
            CHECK(e.code() == errc::invariant_violation);
        }
    }
}

TEST_CASE("audit keeps edits that moved as instructed") {
    // Original T=1 (humble) rated 80; edit must rate lower.
    Corpus c = CorpusBuilder{}
                   .unit("o1", "p1", 1, 1)
                   .unit("e1", "p1", 2, 0)
                   .rating("o1", "ih", 80)
                   .rating("e1", "ih", 30)
                   .corpus;
    const AuditOutcome out = audit_edits(c, 0.0);
    CHECK(out.corpus.units.size() == 2);
    CHECK(out.report.removed_text_ids.empty());
    CHECK(out.report.edits_removed_frac == 0.0);
}

TEST_CASE("audit removes edits that moved against instruction") {
    // Original T=0 rated 20; the edit should rate higher but rated 10.
    Corpus c = CorpusBuilder{}
                   .unit("o1", "p1", 1, 0)
                   .unit("e1", "p1", 2, 1)
                   .rating("o1", "ih", 20)
                   .rating("e1", "ih", 10)
                   .corpus;
    const AuditOutcome out = audit_edits(c, 0.0);
    // Edit removed, then the original falls with no edits left.
    CHECK(out.report.edits_removed_frac == 1.0);
    CHECK(out.report.originals_removed_frac == 1.0);
    CHECK(out.corpus.units.empty());
    CHECK(std::count(out.report.removed_text_ids.begin(), out.report.removed_text_ids.end(),
                     "e1") == 1);
}

TEST_CASE("audit tie handling follows min_gap") {
    Corpus c = CorpusBuilder{}
                   .unit("o1", "p1", 1, 1)
                   .unit("e1", "p1", 2, 0)
                   .rating("o1", "ih", 50)
                   .rating("e1", "ih", 50)
                   .corpus;
    // Zero movement is not "against the instructed direction" at min_gap 0.
    CHECK(audit_edits(c, 0.0).corpus.units.size() == 2);
    // With a positive margin the tie fails the required movement.
    CHECK(audit_edits(c, 1.0).corpus.units.empty());
}

TEST_CASE("audit flags unrated texts but keeps them") {
    Corpus c = CorpusBuilder{}
                   .unit("o1", "p1", 1, 1)
                   .unit("e1", "p1", 2, 0)
                   .rating("o1", "ih", 80)
                   .corpus;  // e1 has no ih rating
    const AuditOutcome out = audit_edits(c, 0.0);
    CHECK(out.corpus.units.size() == 2);
    REQUIRE(out.report.flagged_text_ids.size() == 1);
    CHECK(out.report.flagged_text_ids[0] == "e1");
}

TEST_CASE("audit drops evaluations and ratings of removed texts") {
    Corpus c = CorpusBuilder{}
                   .unit("o1", "p1", 1, 0)
                   .unit("e1", "p1", 2, 1)
                   .unit("o2", "p2", 1, 0)
                   .unit("e2", "p2", 2, 1)
                   .rating("o1", "ih", 20)
                   .rating("e1", "ih", 10)  // wrong direction -> removed
                   .rating("o2", "ih", 20)
                   .rating("e2", "ih", 90)
                   .eval("e1", 4)
                   .eval("o2", 3)
                   .corpus;
    const AuditOutcome out = audit_edits(c, 0.0);
    CHECK(out.corpus.units.size() == 2);
    CHECK(out.corpus.evaluations.size() == 1);
    for (const auto& e : out.corpus.evaluations) CHECK(e.text_id == "o2");
    for (const auto& r : out.corpus.latent_ratings) CHECK(r.text_id.back() == '2');
}

TEST_CASE("audit is idempotent") {
    Corpus c = CorpusBuilder{}
                   .unit("o1", "p1", 1, 0)
                   .unit("e1", "p1", 2, 1)
                   .unit("e1b", "p1", 3, 1)
                   .unit("o2", "p2", 1, 1)
                   .unit("e2", "p2", 2, 0)
                   .rating("o1", "ih", 30)
                   .rating("e1", "ih", 10)   // against -> removed
                   .rating("e1b", "ih", 70)  // fine
                   .rating("o2", "ih", 90)
                   .rating("e2", "ih", 95)  // against -> removed, o2 falls too
                   .corpus;
    const AuditOutcome once = audit_edits(c, 0.0);
    const AuditOutcome twice = audit_edits(once.corpus, 0.0);
    CHECK(twice.report.removed_text_ids.empty());
    REQUIRE(twice.corpus.units.size() == once.corpus.units.size());
    for (std::size_t i = 0; i < once.corpus.units.size(); ++i)
        CHECK(twice.corpus.units[i].text_id == once.corpus.units[i].text_id);
}

TEST_CASE("after audit every surviving pair has both arms") {
    Corpus c = CorpusBuilder{}
                   .unit("o1", "p1", 1, 0)
                   .unit("e1", "p1", 2, 1)
                   .unit("e1b", "p1", 3, 1)
                   .unit("o2", "p2", 1, 1)
                   .unit("e2", "p2", 2, 0)
                   .rating("o1", "ih", 30)
                   .rating("e1", "ih", 5)
                   .rating("e1b", "ih", 80)
                   .rating("o2", "ih", 70)
                   .rating("e2", "ih", 90)
                   .corpus;
    const AuditOutcome out = audit_edits(c, 0.0);
    std::map<std::string, std::pair<bool, bool>> arms;
    for (const auto& u : out.corpus.units) {
        if (u.treatment == 1) arms[u.pair_id].first = true;
        else arms[u.pair_id].second = true;
    }
    for (const auto& [pair, seen] : arms) {
        CHECK(seen.first);
        CHECK(seen.second);
    }
}

TEST_CASE("summarize_counts cross-tabulates evaluations") {
    SUBCASE("empty corpus -> empty table") {
        CHECK(summarize_counts(Corpus{}).empty());
    }
    SUBCASE("direct count") {
        Corpus c = CorpusBuilder{}
                       .unit("o1", "p1", 1, 1, "climate")
                       .unit("e1", "p1", 2, 0, "climate")
                       .eval("o1", 3)
                       .eval("o1", 4)
                       .eval("e1", 2)
                       .eval("e1", 5)
                       .corpus;
        const CountTable t = summarize_counts(c);
        CHECK(t.at(CountKey{"climate", 1, 1}) == 2);
        CHECK(t.at(CountKey{"climate", 0, 0}) == 2);
    }
    SUBCASE("totals equal the number of evaluation rows") {
        Corpus c = minimal_pair();
        CorpusBuilder b;
        b.corpus = c;
        for (int i = 0; i < 17; ++i) b.eval(i % 2 ? "t1" : "t2", 1 + i % 5);
        long total = 0;
        for (const auto& [k, v] : summarize_counts(b.corpus)) total += v;
        CHECK(total == static_cast<long>(b.corpus.evaluations.size()));
    }
}
