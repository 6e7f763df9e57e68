#include "doctest.h"

#include "heapsae/coarsening.hpp"
#include "heapsae/rng.hpp"

#include <cmath>
#include <stdexcept>

using namespace heapsae;

namespace {

const HeapingParams kS4 = HeapingParams::full(7.0, 9.7, -3.4);

HeapingParams random_full(Stream& s) {
    const double a = 6.0 * s.uniform() - 3.0;
    const double b = a + 0.01 + 5.0 * s.uniform();
    return HeapingParams::full(a, b, 4.0 * s.uniform() - 2.0);
}

}  // namespace

TEST_CASE("heaping_probs examples") {
    const auto r = heaping_probs(3.3, HeapingParams::reduced(2.0, 0.0));
    CHECK(r.one == doctest::Approx(0.8808).epsilon(1e-4));
    CHECK(r.five == doctest::Approx(0.1192).epsilon(1e-3));
    CHECK(r.ten == 0.0);
    const auto r2 = heaping_probs(17.0, HeapingParams::reduced(2.0, 0.0));
    CHECK(r2.one == r.one);

    const auto f = heaping_probs(10.0, kS4);
    CHECK(f.one == doctest::Approx(0.3039).epsilon(1e-3));
    CHECK(f.five == doctest::Approx(0.5627).epsilon(1e-3));
    CHECK(f.ten == doctest::Approx(0.1334).epsilon(1e-3));
    CHECK(f.one + f.five + f.ten == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("heaping_probs rejects bad input") {
    CHECK_THROWS_AS(heaping_probs(0.0, kS4), std::invalid_argument);
    CHECK_THROWS_AS(heaping_probs(-1.0, kS4), std::invalid_argument);
    CHECK_THROWS_AS(HeapingParams::full(1.0, 1.0, 0.0), std::invalid_argument);
    HeapingParams bad = kS4;
    bad.gamma02 = 6.0;
    CHECK_THROWS_AS(heaping_probs(3.0, bad), std::invalid_argument);
}

TEST_CASE("heaping_probs lies on the simplex") {
    Stream s(11, 0);
    for (int i = 0; i < 500; ++i) {
        const HeapingParams p = random_full(s);
        const double z = std::exp(6.0 * s.uniform() - 2.0);
        const auto l = heaping_probs(z, p);
        for (double v : {l.one, l.five, l.ten}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(l.one + l.five + l.ten == doctest::Approx(1.0).epsilon(1e-14));
        const auto r = heaping_probs(z, HeapingParams::reduced(p.gamma01, p.gamma1));
        CHECK(r.one + r.five == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(r.ten == 0.0);
    }
}

TEST_CASE("heaping is monotone in z for negative gamma1") {
    double prev1 = 2.0;
    double prev10 = -1.0;
    for (double z = 0.5; z < 40.0; z += 0.25) {
        const auto l = heaping_probs(z, kS4);
        CHECK(l.one < prev1);
        CHECK(l.ten > prev10);
        prev1 = l.one;
        prev10 = l.ten;
    }
}

TEST_CASE("discretized heaping probabilities") {
    const auto a = heaping_probs_discrete(12.7, kS4);
    const auto b = heaping_probs(13.0, kS4);
    CHECK(a.one == b.one);
    CHECK(a.five == b.five);
    CHECK(a.ten == b.ten);
    CHECK(heaping_probs_discrete(0.3, kS4).one == heaping_probs(1.0, kS4).one);
    CHECK(heaping_probs_discrete(13.0, kS4).five == heaping_probs_discrete(12.6, kS4).five);
    for (int q = 1; q <= 30; ++q) {
        CHECK(heaping_probs_discrete(q, kS4).ten == heaping_probs(q, kS4).ten);
    }
    CHECK(representative_integer(1.49) == 1);
    CHECK(representative_integer(1.5) == 2);
    CHECK(representative_integer(12.5) == 13);
}

TEST_CASE("rounding intervals") {
    const Interval a = rounding_interval(HeapingLevel::one, 1);
    CHECK(a.lo == 0.0);
    CHECK(a.hi == 1.5);
    CHECK_FALSE(a.contains(0.0));
    CHECK(a.contains(1e-9));
    const Interval b = rounding_interval(HeapingLevel::five, 10);
    CHECK(b.lo == 7.5);
    CHECK(b.hi == 12.5);
    CHECK(b.contains(7.5));
    CHECK_FALSE(b.contains(12.5));
    const Interval c = rounding_interval(HeapingLevel::ten, 20);
    CHECK(c.lo == 14.5);
    CHECK(c.hi == 24.5);
    CHECK_THROWS_AS(rounding_interval(HeapingLevel::five, 12), std::invalid_argument);
    CHECK_THROWS_AS(rounding_interval(HeapingLevel::ten, 15), std::invalid_argument);
    CHECK_THROWS_AS(rounding_interval(HeapingLevel::one, 0), std::invalid_argument);
}

TEST_CASE("candidate integers") {
    CHECK(candidate_integers(HeapingLevel::one, 10) == std::vector<int>{10});
    CHECK(candidate_integers(HeapingLevel::five, 10) == std::vector<int>{8, 9, 10, 11, 12});
    CHECK(candidate_integers(HeapingLevel::ten, 10) == std::vector<int>{5, 6, 7, 8, 9, 10, 11, 12, 13, 14});
    CHECK(candidate_integers(HeapingLevel::one, 1) == std::vector<int>{1});
    CHECK(candidate_integers(HeapingLevel::five, 5) == std::vector<int>{3, 4, 5, 6, 7});
    CHECK(candidate_integers(HeapingLevel::ten, 20) ==
          std::vector<int>{15, 16, 17, 18, 19, 20, 21, 22, 23, 24});
    CHECK_THROWS_AS(candidate_integers(HeapingLevel::ten, 5), std::invalid_argument);
}

TEST_CASE("feasible levels") {
    CHECK(feasible_levels(3) == LevelSet::of({HeapingLevel::one}));
    CHECK(feasible_levels(10) == LevelSet::of({HeapingLevel::one, HeapingLevel::five, HeapingLevel::ten}));
    CHECK(feasible_levels(15) == LevelSet::of({HeapingLevel::one, HeapingLevel::five}));
    CHECK(feasible_levels(20, HeapingMode::reduced) == LevelSet::of({HeapingLevel::one, HeapingLevel::five}));
    CHECK_THROWS_AS(feasible_levels(0), std::invalid_argument);
    CHECK_THROWS_AS(feasible_levels(21), std::invalid_argument);
    const ObservedAnswer top = ObservedAnswer::from_report(21);
    CHECK(top.censored);
    CHECK_FALSE(ObservedAnswer::from_report(20).censored);
    CHECK_THROWS_AS(ObservedAnswer::from_report(22), std::invalid_argument);
}

TEST_CASE("coarsen examples") {
    CHECK(coarsen(12.7, HeapingLevel::one).value == 13);
    CHECK(coarsen(12.7, HeapingLevel::five).value == 15);
    CHECK(coarsen(12.7, HeapingLevel::ten).value == 10);
    for (HeapingLevel g : kAllLevels) {
        const ObservedAnswer a = coarsen(27.0, g);
        CHECK(a.value == 21);
        CHECK(a.censored);
    }
    CHECK(coarsen(0.4, HeapingLevel::one).value == 1);
    CHECK(coarsen(12.5, HeapingLevel::one).value == 13);
    CHECK(coarsen(20.6, HeapingLevel::one).value == 21);
    CHECK(coarsen(24.4, HeapingLevel::ten).value == 20);
    CHECK(coarsen(24.5, HeapingLevel::ten).value == 21);
    CHECK(coarsen(22.4, HeapingLevel::five).value == 20);
    CHECK(coarsen(22.5, HeapingLevel::five).value == 21);
    CHECK(coarsen(12.7, HeapingLevel::five).feasible == feasible_levels(15));
    CHECK_THROWS_AS(coarsen(0.0, HeapingLevel::one), std::invalid_argument);
    CHECK_THROWS_AS(coarsen(3.0, HeapingLevel::ten, HeapingMode::reduced), std::invalid_argument);
}

TEST_CASE("values below the first heaped cell keep integer precision") {
    CHECK(lowest_cell_edge(HeapingLevel::five) == 2.5);
    CHECK(lowest_cell_edge(HeapingLevel::ten) == 4.5);
    CHECK(coarsen(1.2, HeapingLevel::five).value == 1);
    CHECK(coarsen(2.4, HeapingLevel::five).value == 2);
    CHECK(coarsen(2.5, HeapingLevel::five).value == 5);
    CHECK(coarsen(3.6, HeapingLevel::ten).value == 4);
    CHECK(coarsen(4.5, HeapingLevel::ten).value == 10);
}

TEST_CASE("round trip over every admissible cell") {
    for (HeapingLevel g : kAllLevels) {
        for (int zs = 1; zs <= 20; ++zs) {
            if (!admissible(g, zs)) {
                continue;
            }
            const Interval cell = rounding_interval(g, zs);
            const double lo = cell.lo == 0.0 ? 1e-6 : cell.lo;
            for (int k = 0; k <= 50; ++k) {
                const double z = lo + (cell.hi - lo) * k / 50.5;
                CHECK(coarsen(z, g).value == zs);
            }
            for (int q : candidate_integers(g, zs)) {
                CHECK(report_for_cell(q, g) == zs);
            }
        }
    }
}

TEST_CASE("admissible cells partition the positive axis") {
    for (HeapingLevel g : kAllLevels) {
        for (double z = 0.01; z < 30.0; z += 0.01) {
            int hits = 0;
            for (int zs = 1; zs <= 20; ++zs) {
                if (admissible(g, zs) && rounding_interval(g, zs).contains(z)) {
                    ++hits;
                }
            }
            const bool below = z < lowest_cell_edge(g);
            const bool above = z >= (g == HeapingLevel::one ? 20.5 : g == HeapingLevel::five ? 22.5 : 24.5);
            CHECK(hits == (below || above ? 0 : 1));
        }
    }
}
