#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "texteffect/design.hpp"
#include "texteffect/error.hpp"
#include "texteffect/rng.hpp"

using namespace tfx;
using tfx::test::CorpusBuilder;
using tfx::test::group2;
using tfx::test::oracle_tau_t;

namespace {

// pair1: original T=1 Y=3, edits T=0 Y in {1,3}; pair2: original T=0 Y=2,
// edit T=1 Y=4. Hand evaluation: ((3-2)+(4-2))/2 = 1.5.
std::vector<DesignGroup> two_pair_example() {
    Corpus c = CorpusBuilder{}
                   .unit("o1", "p1", 1, 1)
                   .unit("e1a", "p1", 2, 0)
                   .unit("e1b", "p1", 3, 0)
                   .unit("o2", "p2", 1, 0)
                   .unit("e2", "p2", 2, 1)
                   .eval("o1", 3)
                   .eval("e1a", 1)
                   .eval("e1b", 3)
                   .eval("o2", 2)
                   .eval("e2", 4)
                   .corpus;
    return build_groups(c, "aggressive");
}

std::vector<DesignGroup> fuzz_groups(Rng& rng, int n_pairs) {
    std::vector<DesignGroup> groups;
    for (int i = 0; i < n_pairs; ++i) {
        DesignGroup g;
        g.pair_id = "p" + std::to_string(i);
        const int J = 2 + static_cast<int>(rng.bounded(5));           // 2..6 versions
        const int treated = 1 + static_cast<int>(rng.bounded(J - 1)); // both arms present
        for (int j = 0; j < J; ++j) {
            GroupRow row;
            row.text_id = g.pair_id + "v" + std::to_string(j);
            row.treatment = j < treated ? 1 : 0;
            const int n_evals = 1 + static_cast<int>(rng.bounded(3));
            double sum = 0.0;
            for (int k = 0; k < n_evals; ++k) {
                const double v = 1.0 + 4.0 * rng.uniform();
                row.evals.push_back({v, "v" + std::to_string(rng.bounded(20))});
                sum += v;
            }
            row.text_mean = sum / n_evals;
            g.rows.push_back(std::move(row));
        }
        groups.push_back(std::move(g));
    }
    return groups;
}

// Test-side enumeration of all within-pair relabelings via recursion;
// deliberately independent of the library's odometer implementation.
void enumerate_labels(const std::vector<DesignGroup>& groups, std::size_t pair_index,
                      std::vector<double>& pair_diffs, std::vector<double>& stats) {
    if (pair_index == groups.size()) {
        double acc = 0.0;
        for (double d : pair_diffs) acc += d;
        stats.push_back(acc / static_cast<double>(groups.size()));
        return;
    }
    const DesignGroup& g = groups[pair_index];
    const int J = static_cast<int>(g.rows.size());
    int treated = 0;
    for (const GroupRow& r : g.rows) treated += r.treatment;
    std::vector<char> mask(J, 0);
    std::fill(mask.begin(), mask.begin() + treated, 1);
    std::sort(mask.begin(), mask.end());
    do {
        double s1 = 0.0, s0 = 0.0;
        for (int j = 0; j < J; ++j) (mask[j] ? s1 : s0) += g.rows[j].text_mean;
        pair_diffs.push_back(s1 / treated - s0 / (J - treated));
        enumerate_labels(groups, pair_index + 1, pair_diffs, stats);
        pair_diffs.pop_back();
    } while (std::next_permutation(mask.begin(), mask.end()));
}

double oracle_exact_pvalue(const std::vector<DesignGroup>& groups) {
    std::vector<double> stats;
    std::vector<double> diffs;
    enumerate_labels(groups, 0, diffs, stats);
    const double observed = std::abs(tau_t_point(groups));
    long hits = 0;
    for (double s : stats)
        if (std::abs(s) >= observed - 1e-12 * (1.0 + observed)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(stats.size());
}

}  // namespace

TEST_CASE("tau_t_hat matches the hand-computed two-pair example") {
    const auto groups = two_pair_example();
    CHECK(tau_t_point(groups) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(oracle_tau_t(groups) == doctest::Approx(1.5).epsilon(1e-12));
    const EffectEstimate est = tau_t_hat(groups, "aggressive");
    CHECK(est.n_texts == 5);
    CHECK(est.n_evals == 5);
}

TEST_CASE("tau_t_hat is zero on constant outcomes") {
    std::vector<DesignGroup> groups = {group2("p1", 2.0, 2.0), group2("p2", 2.0, 2.0)};
    CHECK(tau_t_point(groups) == doctest::Approx(0.0));
}

TEST_CASE("tau_t averages evaluations to text level first") {
    // Text with many evaluations must not dominate its arm.
    Corpus c = CorpusBuilder{}
                   .unit("o1", "p1", 1, 1)
                   .unit("e1", "p1", 2, 0)
                   .eval("o1", 5)
                   .eval("o1", 1)
                   .eval("o1", 3)
                   .eval("e1", 2)
                   .corpus;
    const auto groups = build_groups(c, "aggressive");
    CHECK(tau_t_point(groups) == doctest::Approx(3.0 - 2.0));
}

TEST_CASE("tau_t_wls equals tau_t_hat on the example and on fuzzed data") {
    const auto example = two_pair_example();
    CHECK(tau_t_wls_point(example) == doctest::Approx(1.5).epsilon(1e-12));

    Rng rng(2024);
    for (int rep = 0; rep < 50; ++rep) {
        const auto groups = fuzz_groups(rng, 1 + static_cast<int>(rng.bounded(30)));
        const double direct = tau_t_point(groups);
        const double wls = tau_t_wls_point(groups);
        REQUIRE(std::abs(direct - wls) <= 1e-10);
        REQUIRE(std::abs(direct - oracle_tau_t(groups)) <= 1e-10);
    }
}

TEST_CASE("single pair with one edit reduces to the raw difference") {
    std::vector<DesignGroup> groups = {group2("p1", 4.25, 1.5)};
    CHECK(tau_t_wls_point(groups) == doctest::Approx(4.25 - 1.5));
}

TEST_CASE("one edit per original reverts to the unpaired difference in means") {
    Rng rng(7);
    std::vector<DesignGroup> groups;
    double s1 = 0.0, s0 = 0.0;
    const int n = 40;
    for (int i = 0; i < n; ++i) {
        const double a = rng.uniform() * 4 + 1, b = rng.uniform() * 4 + 1;
        groups.push_back(group2("p" + std::to_string(i), a, b));
        s1 += a;
        s0 += b;
    }
    CHECK(tau_t_point(groups) == doctest::Approx(s1 / n - s0 / n).epsilon(1e-12));
}

TEST_CASE("estimators reject pairs lacking an arm") {
    DesignGroup g;
    g.pair_id = "p1";
    g.rows.push_back({"a", 1, {{1.0, "v"}}, 1.0});
    g.rows.push_back({"b", 1, {{2.0, "v"}}, 2.0});
    std::vector<DesignGroup> groups = {g};
    CHECK_THROWS_AS(tau_t_point(groups), Error);
    try {
        tau_t_point(groups);
    } catch (const Error& e) {
        CHECK(e.code() == errc::empty_arm);
    }
}

TEST_CASE("build_groups drops pairs without both evaluated arms") {
    Corpus c = CorpusBuilder{}
                   .unit("o1", "p1", 1, 1)
                   .unit("e1", "p1", 2, 0)
                   .unit("o2", "p2", 1, 1)
                   .unit("e2", "p2", 2, 0)
                   .eval("o1", 3)
                   .eval("e1", 2)
                   .eval("o2", 4)  // p2's edit never evaluated
                   .corpus;
    const auto groups = build_groups(c, "aggressive");
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].pair_id == "p1");
}

TEST_CASE("exact permutation test matches full enumeration") {
    const auto groups = two_pair_example();
    const double expected = oracle_exact_pvalue(groups);
    CHECK(permutation_pvalue_exact(groups) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(permutation_arrangements(groups) == 6);  // C(3,1) * C(2,1)

    Rng rng(99);
    for (int rep = 0; rep < 10; ++rep) {
        const auto fuzz = fuzz_groups(rng, 1 + static_cast<int>(rng.bounded(5)));
        CHECK(permutation_pvalue_exact(fuzz) ==
              doctest::Approx(oracle_exact_pvalue(fuzz)).epsilon(1e-12));
    }
}

TEST_CASE("permutation p-value is 1 when all outcomes are identical") {
    std::vector<DesignGroup> groups = {group2("p1", 3.0, 3.0), group2("p2", 3.0, 3.0),
                                       group2("p3", 3.0, 3.0)};
    CHECK(permutation_pvalue(groups, 200, 5) == doctest::Approx(1.0));
    CHECK(permutation_pvalue_exact(groups) == doctest::Approx(1.0));
}

TEST_CASE("permutation p-values are invariant to affine outcome relabeling") {
    Rng rng(31);
    const auto groups = fuzz_groups(rng, 8);
    const double p0 = permutation_pvalue(groups, 500, 11);

    for (const double scale : {2.0, 0.25}) {
        std::vector<DesignGroup> rescaled = groups;
        for (auto& g : rescaled)
            for (auto& r : g.rows) {
                r.text_mean = scale * r.text_mean + 3.0;
                for (auto& e : r.evals) e.value = scale * e.value + 3.0;
            }
        CHECK(permutation_pvalue(rescaled, 500, 11) == doctest::Approx(p0));
        CHECK(permutation_pvalue_exact(rescaled) ==
              doctest::Approx(permutation_pvalue_exact(groups)));
    }
}

TEST_CASE("permutation test is deterministic in the seed") {
    Rng rng(55);
    const auto groups = fuzz_groups(rng, 12);
    CHECK(permutation_pvalue(groups, 300, 42) == permutation_pvalue(groups, 300, 42));
    CHECK(permutation_pvalue(groups, 300, 42) != permutation_pvalue(groups, 300, 43));
    CHECK_THROWS_AS(permutation_pvalue(groups, 50, 1), Error);  // n_perm >= 100
}

namespace {

// HC1 heteroskedasticity-robust oracle for the evaluation-level WLS with
// absorbed pair effects, written independently of the library path.
double hc1_oracle(const std::vector<DesignGroup>& groups) {
    struct Row {
        double y, t, w;
    };
    std::vector<Row> rows;
    std::vector<std::pair<std::size_t, std::size_t>> pair_ranges;
    for (const DesignGroup& g : groups) {
        long n1 = 0, n0 = 0;
        for (const GroupRow& r : g.rows) (r.treatment ? n1 : n0) += 1;
        const std::size_t first = rows.size();
        for (const GroupRow& r : g.rows) {
            const double w_text = 1.0 / (r.treatment ? n1 : n0);
            for (const EvalObs& e : r.evals)
                rows.push_back({e.value, static_cast<double>(r.treatment),
                                w_text / static_cast<double>(r.evals.size())});
        }
        pair_ranges.emplace_back(first, rows.size());
    }
    // demean within pair
    for (auto [a, b] : pair_ranges) {
        double sw = 0, swy = 0, swt = 0;
        for (std::size_t i = a; i < b; ++i) {
            sw += rows[i].w;
            swy += rows[i].w * rows[i].y;
            swt += rows[i].w * rows[i].t;
        }
        for (std::size_t i = a; i < b; ++i) {
            rows[i].y -= swy / sw;
            rows[i].t -= swt / sw;
        }
    }
    double sxx = 0, sxy = 0;
    for (const Row& r : rows) {
        sxx += r.w * r.t * r.t;
        sxy += r.w * r.t * r.y;
    }
    const double beta = sxy / sxx;
    double meat = 0;
    for (const Row& r : rows) {
        const double s = r.w * r.t * (r.y - beta * r.t);
        meat += s * s;
    }
    const double n = static_cast<double>(rows.size());
    const double k = static_cast<double>(groups.size()) + 1.0;
    const double corr = n / (n - 1.0) * (n - 1.0) / (n - k);  // G=n singleton clusters
    return std::sqrt(corr * meat / (sxx * sxx));
}

std::vector<DesignGroup> clustered_fixture(int n_pairs, std::uint64_t seed,
                                           bool unique_evaluators) {
    Rng rng(seed);
    std::vector<DesignGroup> groups;
    int eval_counter = 0;
    for (int i = 0; i < n_pairs; ++i) {
        DesignGroup g;
        g.pair_id = "p" + std::to_string(i);
        for (int j = 0; j < 2; ++j) {
            GroupRow row;
            row.text_id = g.pair_id + "v" + std::to_string(j);
            row.treatment = j == 0 ? 1 : 0;
            const int n_evals = 2 + static_cast<int>(rng.bounded(2));
            double sum = 0.0;
            for (int k = 0; k < n_evals; ++k) {
                const double v = 3.0 + 0.5 * row.treatment + rng.normal();
                const std::string ev = unique_evaluators
                                           ? "u" + std::to_string(eval_counter++)
                                           : "v" + std::to_string(rng.bounded(6));
                row.evals.push_back({v, ev});
                sum += v;
            }
            row.text_mean = sum / n_evals;
            g.rows.push_back(std::move(row));
        }
        groups.push_back(std::move(g));
    }
    return groups;
}

}  // namespace

TEST_CASE("clustered WLS point equals tau_t_hat") {
    const auto groups = clustered_fixture(40, 17, false);
    const ClusteredWls wls = wls_evaluation_clustered(groups);
    CHECK(wls.point == doctest::Approx(tau_t_point(groups)).epsilon(1e-10));
    CHECK(wls.n_clusters > 1);
    CHECK(wls.p_value >= 0.0);
    CHECK(wls.p_value <= 1.0);
}

TEST_CASE("clustered SE with singleton clusters matches the HC1 oracle") {
    const auto groups = clustered_fixture(60, 23, /*unique_evaluators=*/true);
    const ClusteredWls wls = wls_evaluation_clustered(groups);
    CHECK(wls.std_error == doctest::Approx(hc1_oracle(groups)).epsilon(1e-9));
}

TEST_CASE("duplicating every evaluation changes the SE only by the small-sample factor") {
    const auto groups = clustered_fixture(50, 29, false);
    const ClusteredWls base = wls_evaluation_clustered(groups);

    std::vector<DesignGroup> doubled = groups;
    for (auto& g : doubled)
        for (auto& r : g.rows) {
            auto evals = r.evals;
            r.evals.insert(r.evals.end(), evals.begin(), evals.end());
        }
    const ClusteredWls dup = wls_evaluation_clustered(doubled);

    CHECK(dup.point == doctest::Approx(base.point).epsilon(1e-10));
    const double n1 = static_cast<double>(base.n_evals);
    const double n2 = static_cast<double>(dup.n_evals);
    const double k = static_cast<double>(base.n_pairs) + 1.0;
    const double factor = std::sqrt(((n2 - 1.0) / (n2 - k)) / ((n1 - 1.0) / (n1 - k)));
    CHECK(dup.std_error == doctest::Approx(base.std_error * factor).epsilon(1e-9));
}

TEST_CASE("clustered SE refuses a single cluster") {
    auto groups = clustered_fixture(10, 31, false);
    for (auto& g : groups)
        for (auto& r : g.rows)
            for (auto& e : r.evals) e.evaluator_id = "only";
    CHECK_THROWS_AS(wls_evaluation_clustered(groups), Error);
}

TEST_CASE("tau_d examples") {
    SUBCASE("constant outcomes give zero") {
        Corpus c = CorpusBuilder{}
                       .unit("o1", "p1", 1, 1)
                       .unit("e1", "p1", 2, 0)
                       .eval("o1", 3)
                       .eval("e1", 3)
                       .corpus;
        CHECK(tau_d_hat(c.units, c.evaluations, "aggressive").point == doctest::Approx(0.0));
    }
    SUBCASE("balanced one-edit-per-original corpus: tau_d equals tau_t") {
        Rng rng(3);
        CorpusBuilder b;
        for (int i = 0; i < 30; ++i) {
            const std::string p = "p" + std::to_string(i);
            const int d = static_cast<int>(rng.bounded(2));
            b.unit(p + "o", p, 1, d).unit(p + "e", p, 2, 1 - d);
            b.eval(p + "o", 1.0 + 4.0 * rng.uniform());
            b.eval(p + "e", 1.0 + 4.0 * rng.uniform());
        }
        const auto groups = build_groups(b.corpus, "aggressive");
        const double tt = tau_t_point(groups);
        const double td = tau_d_hat(b.corpus.units, b.corpus.evaluations, "aggressive").point;
        CHECK(td == doctest::Approx(tt).epsilon(1e-10));
    }
    SUBCASE("empty arm rejected") {
        Corpus c = CorpusBuilder{}
                       .unit("o1", "p1", 1, 1)
                       .unit("e1", "p1", 2, 0)
                       .eval("o1", 3)
                       .corpus;
        CHECK_THROWS_AS(tau_d_hat(c.units, c.evaluations, "aggressive"), Error);
    }
}
