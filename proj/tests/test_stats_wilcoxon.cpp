#include <doctest.h>

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "neuron_margins/common.hpp"
#include "neuron_margins/stats.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace neuron_margins;

using Pairs = std::vector<std::pair<double, double>>;

static Pairs from_diffs(const std::vector<double>& diffs) {
    Pairs out;
    for (double d : diffs) out.emplace_back(0.0, d);
    return out;
}

TEST_CASE("signed-rank: five distinct negative differences, one-sided") {
    Pairs pairs = from_diffs({-1, -2, -3, -4, -5});
    TestResult r = wilcoxon_signed_rank(pairs, Alternative::less, 0.05);
    CHECK(r.statistic == 0.0);  // no positive ranks
    CHECK(r.method == Method::exact);
    CHECK(r.p_value == doctest::Approx(1.0 / 32.0).epsilon(1e-12));
    REQUIRE(r.exact_p.defined());
    CHECK(r.exact_p.num == 1);
    CHECK(r.exact_p.den == 32);
    CHECK(r.rejected);
    CHECK(r.n.n1 == 5);
    CHECK(r.n.used == 5);
    CHECK(r.n.zeros == 0);
}

TEST_CASE("signed-rank: statistic is the positive-rank sum") {
    Pairs pairs = from_diffs({1.0, -2.0, 3.0});
    TestResult r = wilcoxon_signed_rank(pairs, Alternative::two_sided, 0.05);
    CHECK(r.statistic == 4.0);  // ranks 1 and 3
}

TEST_CASE("signed-rank: all-zero differences degenerate to p = 1") {
    Pairs pairs{{1.0, 1.0}, {2.5, 2.5}, {0.0, 0.0}};
    for (ZeroPolicy zp : {ZeroPolicy::wilcoxon, ZeroPolicy::pratt}) {
        TestResult r = wilcoxon_signed_rank(pairs, Alternative::less, 0.05, zp);
        CHECK(r.degenerate);
        CHECK(r.p_value == 1.0);
        CHECK_FALSE(r.rejected);
        CHECK(r.n.zeros == 3);
        CHECK(r.n.used == 0);
    }
}

TEST_CASE("signed-rank: empty input is an error") {
    CHECK_THROWS_AS(wilcoxon_signed_rank({}, Alternative::less, 0.05), ValidationError);
}

TEST_CASE("signed-rank: zero handling under both policies (pinned case)") {
    // x = 1,2,3,4,7  y = 1,3,2,6,4  ->  d = 0, 1, -1, 2, -3
    Pairs pairs{{1, 1}, {2, 3}, {3, 2}, {4, 6}, {7, 4}};

    TestResult w = wilcoxon_signed_rank(pairs, Alternative::less, 0.05, ZeroPolicy::wilcoxon);
    CHECK(w.statistic == doctest::Approx(4.5));  // ranks 1.5 + 3 among the four nonzero d
    CHECK(w.method == Method::exact);
    // Conditional enumeration given the tied ranks {1.5, 1.5, 3, 4}:
    // 8 of the 16 sign assignments give W+ <= 4.5. (A conservative fallback
    // to the tie-free integer distribution would give 9/16 instead; this
    // artifact enumerates the observed ranks exactly.)
    CHECK(w.p_value == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w.exact_p.num == 1);
    CHECK(w.exact_p.den == 2);
    CHECK(w.n.zeros == 1);
    CHECK(w.n.used == 4);

    TestResult p = wilcoxon_signed_rank(pairs, Alternative::less, 0.05, ZeroPolicy::pratt);
    CHECK(p.statistic == doctest::Approx(6.5));  // zero keeps rank 1; positives rank 2.5 + 4
    CHECK(p.method == Method::exact);
    CHECK(p.p_value == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.exact_p.num == 1);
    CHECK(p.exact_p.den == 2);
    CHECK(p.n.used == 4);
}

TEST_CASE("signed-rank: policies coincide when no difference is zero") {
    std::mt19937 gen(444);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> diffs(6 + t % 10);
        for (auto& d : diffs) {
            do {
                d = dist(gen);
            } while (d == 0.0);
        }
        Pairs pairs = from_diffs(diffs);
        for (Alternative alt : {Alternative::greater, Alternative::less, Alternative::two_sided}) {
            TestResult a = wilcoxon_signed_rank(pairs, alt, 0.05, ZeroPolicy::wilcoxon);
            TestResult b = wilcoxon_signed_rank(pairs, alt, 0.05, ZeroPolicy::pratt);
            CHECK(a.p_value == doctest::Approx(b.p_value).epsilon(1e-12));
            CHECK(a.statistic == doctest::Approx(b.statistic));
        }
    }
}

TEST_CASE("signed-rank: flipping every difference swaps the tails exactly") {
    std::mt19937 gen(17);
    for (int t = 0; t < 30; ++t) {
        std::vector<double> mags(1 + gen() % 12);
        double next = 0.5;
        for (auto& m : mags) m = (next += 0.5 + (gen() % 7) * 0.25);  // distinct magnitudes
        std::vector<double> diffs;
        for (double m : mags) diffs.push_back((gen() & 1) ? m : -m);
        std::vector<double> flipped;
        for (double d : diffs) flipped.push_back(-d);

        TestResult less = wilcoxon_signed_rank(from_diffs(diffs), Alternative::less, 0.05);
        TestResult greater =
            wilcoxon_signed_rank(from_diffs(flipped), Alternative::greater, 0.05);
        REQUIRE(less.method == Method::exact);
        CHECK(less.exact_p.num == greater.exact_p.num);
        CHECK(less.exact_p.den == greater.exact_p.den);
    }
}

TEST_CASE("signed-rank: exact equals 2^n enumeration, ties included") {
    std::mt19937 gen(909);
    std::uniform_int_distribution<int> mag(1, 5);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> diffs(1 + gen() % 12);
        for (auto& d : diffs) d = mag(gen) * ((gen() & 1) ? 1.0 : -1.0);
        Pairs pairs = from_diffs(diffs);
        for (auto [alt, tail] : {std::pair{Alternative::greater, oracles::Tail::ge},
                                 std::pair{Alternative::less, oracles::Tail::le},
                                 std::pair{Alternative::two_sided, oracles::Tail::two_sided}}) {
            TestResult r = wilcoxon_signed_rank(pairs, alt, 0.05);
            REQUIRE(r.method == Method::exact);
            oracles::Rational ref = oracles::wilcoxon_exact_brute(diffs, tail);
            CHECK(r.exact_p.num == ref.num);
            CHECK(r.exact_p.den == ref.den);
        }
    }
}

TEST_CASE("signed-rank: normal path matches pinned references with zeros and ties") {
    std::vector<double> x{4, 4, 0, 4, 2, 3, 3, 1, 5, 0, 1, 2, 3, 2, 0, 0, 0, 0, 0, 5,
                          1, 3, 4, 1, 1, 2, 1, 5, 1, 5, 4, 5, 0, 2, 3, 2, 3, 4, 3, 0};
    std::vector<double> y{6, 4, 2, 3, 1, 5, 1, -1, 4, 1, -1, 4, 2, 1, 0, 2, 2, 2, -1, 3,
                          2, 4, 5, -1, -1, 2, 0, 5, 3, 4, 4, 4, -1, 4, 1, 1, 1, 2, 2, 1};
    REQUIRE(x.size() == 40);
    REQUIRE(y.size() == 40);
    Pairs pairs;
    for (std::size_t i = 0; i < x.size(); ++i) pairs.emplace_back(x[i], y[i]);

    TestResult w = wilcoxon_signed_rank(pairs, Alternative::less, 0.05, ZeroPolicy::wilcoxon);
    CHECK(w.method == Method::normal_approx);
    CHECK(w.n.zeros == 5);
    CHECK(w.n.used == 35);
    CHECK(w.statistic == doctest::Approx(283.5));
    CHECK(w.p_value == doctest::Approx(0.3002545825528008).epsilon(1e-9));

    TestResult p = wilcoxon_signed_rank(pairs, Alternative::less, 0.05, ZeroPolicy::pratt);
    CHECK(p.method == Method::normal_approx);
    CHECK(p.statistic == doctest::Approx(353.5));
    CHECK(p.p_value == doctest::Approx(0.25260437607800934).epsilon(1e-9));

    TestResult p2 = wilcoxon_signed_rank(pairs, Alternative::two_sided, 0.05, ZeroPolicy::pratt);
    CHECK(p2.p_value == doctest::Approx(0.5052087521560187).epsilon(1e-9));
}

TEST_CASE("signed-rank: explicit exact refuses oversize samples") {
    std::vector<double> diffs(30);
    for (std::size_t i = 0; i < diffs.size(); ++i) diffs[i] = static_cast<double>(i + 1);
    CHECK_THROWS_AS(
        wilcoxon_signed_rank(from_diffs(diffs), Alternative::less, 0.05, ZeroPolicy::wilcoxon,
                             MethodChoice::exact),
        ValidationError);
}

TEST_CASE("signed-rank fuzz: p stays within [0, 1] under zeros and heavy ties") {
    std::mt19937 gen(5150);
    std::uniform_int_distribution<int> d(-2, 2);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> diffs(1 + gen() % 40);
        for (auto& v : diffs) v = d(gen);
        Pairs pairs = from_diffs(diffs);
        for (ZeroPolicy zp : {ZeroPolicy::wilcoxon, ZeroPolicy::pratt}) {
            for (Alternative alt :
                 {Alternative::greater, Alternative::less, Alternative::two_sided}) {
                TestResult r = wilcoxon_signed_rank(pairs, alt, 0.05, zp);
                CHECK(r.p_value >= 0.0);
                CHECK(r.p_value <= 1.0);
            }
        }
    }
}

// --- checks against the bundled cross-dataset comparison fixtures ---

TEST_CASE("pair fixtures: >0 block is a one-sided exact 1/8192") {
    TestResult r = wilcoxon_from_pairs(testsupport::fixture("confirmed_pairs/confirmed_gt0.csv"),
                                       Alternative::less, 0.05);
    CHECK(r.n.n1 == 13);
    CHECK(r.statistic == 0.0);
    REQUIRE(r.method == Method::exact);
    CHECK(r.exact_p.num == 1);
    CHECK(r.exact_p.den == 8192);
    CHECK(r.p_value == doctest::Approx(0.0001220703125).epsilon(1e-12));
    CHECK(r.rejected);
}

TEST_CASE("pair fixtures: >20 and >40 blocks reproduce their exact p-values") {
    TestResult r20 = wilcoxon_from_pairs(testsupport::fixture("confirmed_pairs/confirmed_gt20.csv"),
                                         Alternative::less, 0.05);
    CHECK(r20.n.n1 == 15);
    CHECK(r20.method == Method::exact);
    CHECK(r20.p_value == doctest::Approx(0.000427246).epsilon(1e-4));
    CHECK(r20.rejected);

    TestResult r40 = wilcoxon_from_pairs(testsupport::fixture("confirmed_pairs/confirmed_gt40.csv"),
                                         Alternative::less, 0.05);
    CHECK(r40.n.n1 == 21);
    CHECK(r40.method == Method::exact);
    CHECK(r40.statistic == doctest::Approx(67.0));
    CHECK(r40.p_value == doctest::Approx(0.0478997).epsilon(1e-4));
    CHECK(r40.rejected);
}

TEST_CASE("pair fixtures: >60 block fails to reject") {
    TestResult r = wilcoxon_from_pairs(testsupport::fixture("confirmed_pairs/confirmed_gt60.csv"),
                                       Alternative::less, 0.05);
    CHECK(r.n.n1 == 23);
    CHECK(r.method == Method::exact);
    CHECK(r.statistic == doctest::Approx(119.0));
    CHECK(r.p_value == doctest::Approx(0.290169).epsilon(1e-4));
    CHECK_FALSE(r.rejected);
}

TEST_CASE("pair fixtures: pooled 72-pair comparison uses the normal path") {
    TestResult r = wilcoxon_from_pairs(testsupport::fixture("confirmed_pairs/confirmed_all.csv"),
                                       Alternative::less, 0.05);
    CHECK(r.n.n1 == 72);
    CHECK(r.method == Method::normal_approx);
    CHECK(r.continuity_correction);
    CHECK(r.p_value == doctest::Approx(5.63256e-07).epsilon(1e-4));
    CHECK(r.rejected);
}
