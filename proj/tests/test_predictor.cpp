#include "doctest.h"

#include "heapsae/predictor.hpp"
#include "heapsae/tables.hpp"

#include <cmath>

using namespace heapsae;

namespace {

IntensityState lnm_state(int domains) {
    IntensityState s;
    IntensityParams& t = s.theta;
    t.components = 2;
    t.beta0_mu1 = 1.7;
    t.beta0_mu2 = 2.7;
    t.beta_mu = {0.05};
    t.u_mu.assign(domains, 0.0);
    t.sigma1 = 0.5;
    t.sigma2 = 0.25;
    t.tau_mu = 0.25;
    t.beta0_pi = 0.4;
    t.beta_pi = {0.2};
    t.u_pi.assign(domains, 0.0);
    t.tau_pi = 0.1;
    s.gamma = HeapingParams::full(7.0, 9.7, -3.4);
    return s;
}

ParticipationParams participation(int domains) {
    ParticipationParams p;
    p.beta0 = -0.5;
    p.beta = {0.8};
    p.u.assign(domains, 0.0);
    p.tau = 0.3;
    return p;
}

UnitRecord unit(int domain, double x, std::optional<int> w, std::optional<int> report = std::nullopt) {
    UnitRecord r;
    r.domain = domain;
    r.x = {x};
    r.w = w;
    if (report) {
        r.answer = ObservedAnswer::from_report(*report);
    }
    return r;
}

// Small population: two domains, two covariate patterns each.
struct Fixture {
    PopulationFrame frame;
    std::vector<UnitRecord> sample;
    std::vector<IntensityState> theta;
    std::vector<ParticipationParams> delta;

    Fixture() {
        const std::vector<int> d{0, 0, 1, 1};
        const std::vector<std::vector<double>> x{{0.0}, {1.0}, {0.0}, {1.0}};
        const std::vector<long long> n{30, 20, 4, 3};
        frame = PopulationFrame::from_patterns(2, d, x, n);
        sample = {unit(0, 0.0, 1, 7), unit(0, 1.0, 0), unit(0, 0.0, 1, 20), unit(1, 1.0, 1, 10),
                  unit(1, 0.0, 0)};
        for (int b = 0; b < 40; ++b) {
            IntensityState s = lnm_state(2);
            s.theta.u_mu = {0.02 * b - 0.4, 0.1};
            s.theta.beta0_pi = 0.4 + 0.01 * b;
            theta.push_back(s);
            ParticipationParams p = participation(2);
            p.beta0 = -0.5 + 0.02 * b;
            delta.push_back(p);
        }
    }

    PredictionInput input() const {
        PredictionInput in;
        in.frame = &frame;
        in.sample = sample;
        in.intensity = theta;
        in.participation = delta;
        in.seed = 99;
        in.stream = 3;
        return in;
    }
};

}  // namespace

TEST_CASE("population frames merge repeated patterns") {
    std::vector<UnitRecord> units{unit(0, 1.0, std::nullopt), unit(1, 1.0, std::nullopt),
                                  unit(0, 1.0, std::nullopt), unit(0, 0.0, std::nullopt)};
    const PopulationFrame f = PopulationFrame::from_units(units, 2);
    CHECK(f.pattern_domain.size() == 3);
    CHECK(f.pattern_count[0] == 2);
    CHECK(f.domain_sizes() == std::vector<long long>{3, 1});
    CHECK(f.find(0, std::vector<double>{0.0}) == 2);
    CHECK(f.find(1, std::vector<double>{0.0}) == PopulationFrame::npos);
    const std::vector<int> d{0};
    const std::vector<std::vector<double>> x{{0.0}};
    CHECK_THROWS_AS(PopulationFrame::from_patterns(2, d, x, std::vector<long long>{0}), DataError);
    CHECK_THROWS_AS(PopulationFrame::from_patterns(2, std::vector<int>{2}, x, std::vector<long long>{1}), DataError);
}

TEST_CASE("unit streams are positioned slices of the cell stream") {
    Stream cell = cell_stream(5, 1, UnitSlot::unsampled, 3, 17);
    cell.seek(9 * kBlocksPerUnit);
    Stream u = unit_stream(5, 1, UnitSlot::unsampled, 3, 17, 9);
    for (int i = 0; i < 8; ++i) {
        CHECK(cell() == u());
    }
    Stream other = unit_stream(5, 1, UnitSlot::unsampled, 3, 17, 10);
    Stream again = unit_stream(5, 1, UnitSlot::unsampled, 3, 17, 9);
    CHECK(other() != again());
}

TEST_CASE("predictive draws follow the model") {
    const IntensityState st = lnm_state(1);
    const MixtureAt m = mixture_at(std::vector<double>{0.0}, 0, st.theta);
    const double truth = m.pi * std::exp(m.mu1 + 0.5 * m.sigma1 * m.sigma1) +
                         (1.0 - m.pi) * std::exp(m.mu2 + 0.5 * m.sigma2 * m.sigma2);
    const int n = 200000;
    double sum = 0.0;
    double sq = 0.0;
    double heavy = 0.0;
    std::array<double, 3> levels{};
    std::array<double, 3> expected{};
    for (int i = 0; i < n; ++i) {
        Stream s = unit_stream(11, 0, UnitSlot::unsampled, 0, 0, i);
        const UnitDraw d = predict_unit(s, std::nullopt, m, st.gamma, HeapingMode::full);
        sum += d.z;
        sq += d.z * d.z;
        heavy += d.z >= 20.0;
        levels[level_index(d.g)] += 1.0;
        const LevelProbs p = heaping_probs_discrete(d.z, *st.gamma);
        expected[0] += p.one;
        expected[1] += p.five;
        expected[2] += p.ten;
        CHECK(d.zstar.value == coarsen(d.z, d.g).value);
    }
    const double mean_z = sum / n;
    const double se = std::sqrt((sq / n - mean_z * mean_z) / n);
    CHECK(std::abs(mean_z - truth) < 4.0 * se);
    const double p_heavy = m.ccdf(20.0);
    CHECK(std::abs(heavy / n - p_heavy) < 4.0 * std::sqrt(p_heavy * (1 - p_heavy) / n));
    for (int g = 0; g < 3; ++g) {
        const double p = expected[g] / n;
        CHECK(std::abs(levels[g] / n - p) < 4.0 * std::sqrt(p * (1 - p) / n) + 1e-12);
    }
}

TEST_CASE("participation draws") {
    int ones = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        Stream s = unit_stream(2, 0, UnitSlot::unsampled, 0, 0, i);
        ones += predict_w(s, 0.3);
    }
    CHECK(std::abs(ones / double(n) - 0.3) < 4.0 * std::sqrt(0.21 / n));
}

TEST_CASE("domain predictors match a unit-by-unit recomputation") {
    const Fixture fx;
    const auto draws = hb_predict(fx.input());
    REQUIRE(draws.size() == 2);
    // Expand every unit and redraw it through predict_unit.
    for (int d = 0; d < 2; ++d) {
        for (std::size_t b = 0; b < fx.theta.size(); ++b) {
            double w = 0.0;
            double z = 0.0;
            double hs = 0.0;
            std::size_t j = 0;
            std::vector<long long> left = fx.frame.pattern_count;
            for (const auto& r : fx.sample) {
                if (r.domain != d) {
                    continue;
                }
                --left[fx.frame.find(d, r.x)];
                Stream s = unit_stream(99, 3, UnitSlot::sampled, d, b, j++);
                const UnitDraw u = predict_unit(s, std::nullopt, mixture_at(r.x, d, fx.theta[b].theta),
                                                std::nullopt, HeapingMode::full);
                if (*r.w == 1) {
                    w += 1;
                    z += u.z;
                    hs += u.z >= 20.0;
                }
            }
            std::size_t k = 0;
            for (std::size_t c = 0; c < left.size(); ++c) {
                if (fx.frame.pattern_domain[c] != d) {
                    continue;
                }
                for (long long i = 0; i < left[c]; ++i) {
                    Stream s = unit_stream(99, 3, UnitSlot::unsampled, d, b, k++);
                    const double nu = participation_prob(fx.frame.pattern_x[c], d, fx.delta[b]);
                    const UnitDraw u = predict_unit(s, nu, mixture_at(fx.frame.pattern_x[c], d, fx.theta[b].theta),
                                                    std::nullopt, HeapingMode::full);
                    if (u.w == 1) {
                        w += 1;
                        z += u.z;
                        hs += u.z >= 20.0;
                    }
                }
            }
            const double size = d == 0 ? 50.0 : 7.0;
            CHECK(draws[d].wbar[b] == doctest::Approx(w / size).epsilon(1e-12));
            CHECK(draws[d].zbar[b] == doctest::Approx(z / w).epsilon(1e-12));
            CHECK(draws[d].hsbar[b] == doctest::Approx(hs / w).epsilon(1e-12));
        }
    }
}

TEST_CASE("domain predictors do not depend on the worker count") {
    const Fixture fx;
    PredictionInput in = fx.input();
    const auto one = hb_predict(in);
    in.workers = 3;
    const auto three = hb_predict(in);
    for (int d = 0; d < 2; ++d) {
        CHECK(one[d].zbar == three[d].zbar);
        CHECK(one[d].wbar == three[d].wbar);
    }
}

TEST_CASE("a census domain has a zero-width participation interval") {
    Fixture fx;
    const std::vector<int> d{0, 0, 1, 1};
    const std::vector<std::vector<double>> x{{0.0}, {1.0}, {0.0}, {1.0}};
    const std::vector<long long> n{30, 20, 1, 1};
    fx.frame = PopulationFrame::from_patterns(2, d, x, n);
    const auto est = hb_wbar(fx.input());
    CHECK(est[1].summary.q05 == est[1].summary.q95);
    CHECK(est[1].summary.mean == doctest::Approx(0.5));
    CHECK(est[0].summary.q95 > est[0].summary.q05);
}

TEST_CASE("large-domain predictors approach the model means") {
    // One domain of 20000 non-sampled units with every unit participating.
    const IntensityState st = lnm_state(1);
    const std::vector<int> d{0};
    const std::vector<std::vector<double>> x{{0.0}};
    const PopulationFrame frame = PopulationFrame::from_patterns(1, d, x, std::vector<long long>{20001});
    const std::vector<UnitRecord> sample{unit(0, 0.0, 1, 8)};
    const std::vector<IntensityState> theta(10, st);
    PredictionInput in;
    in.frame = &frame;
    in.sample = sample;
    in.intensity = theta;
    const auto draws = hb_predict(in);
    const MixtureAt m = mixture_at(x[0], 0, st.theta);
    const double ez = m.pi * std::exp(m.mu1 + 0.5 * m.sigma1 * m.sigma1) +
                      (1.0 - m.pi) * std::exp(m.mu2 + 0.5 * m.sigma2 * m.sigma2);
    const double zbar = mean(draws[0].zbar);
    const double hs = mean(draws[0].hsbar);
    CHECK(zbar == doctest::Approx(ez).epsilon(0.01));
    CHECK(hs == doctest::Approx(m.ccdf(20.0)).epsilon(0.03));
    CHECK(draws[0].wbar.front() == 1.0);
}

TEST_CASE("prediction input errors") {
    Fixture fx;
    PredictionInput in = fx.input();
    fx.sample[3].w = 0;  // domain 2 loses its only participant
    in.sample = fx.sample;
    CHECK_THROWS_WITH_AS(hb_predict(in), "domains without a sampled participant: 2", DataError);
    Fixture fy;
    fy.sample.push_back(unit(1, 3.0, 1, 4));
    in = fy.input();
    CHECK_THROWS_AS(hb_predict(in), DataError);
    Fixture fz;
    for (int i = 0; i < 4; ++i) {
        fz.sample.push_back(unit(1, 1.0, 1, 4));
    }
    in = fz.input();
    CHECK_THROWS_AS(hb_predict(in), DataError);
    Fixture fw;
    in = fw.input();
    std::vector<ParticipationParams> short_delta(fw.delta.begin(), fw.delta.begin() + 3);
    in.participation = short_delta;
    CHECK_THROWS_AS(hb_predict(in), std::invalid_argument);
}

TEST_CASE("direct estimators") {
    const std::vector<int> w{1, 1, 0, 1};
    const std::vector<double> z{3.0, 20.0, 21.0};
    const DirectEstimate e = direct_estimate(0, 10, w, z);
    CHECK(e.wbar == doctest::Approx(0.75));
    CHECK(e.wbar_se == doctest::Approx(std::sqrt(0.6 * 0.25 / 4.0)));
    CHECK(e.zbar == doctest::Approx(44.0 / 3.0));
    CHECK(e.hsbar == doctest::Approx(2.0 / 3.0));
    CHECK(e.participants == 3);
    const std::vector<int> none{0, 0};
    const DirectEstimate m = direct_estimate(1, 5, none, std::vector<double>{});
    CHECK(std::isnan(m.zbar));
    CHECK(std::isnan(m.hsbar));
    CHECK(m.wbar == 0.0);
    CHECK_THROWS_AS(direct_estimate(0, 2, w, z), DataError);

    const std::vector<UnitRecord> sample{unit(0, 0.0, 1, 20), unit(0, 0.0, 1, 21), unit(0, 0.0, 0),
                                         unit(1, 0.0, 1, 5)};
    const auto all = direct_estimates(sample, std::vector<long long>{10, 10});
    CHECK(all[0].hsbar == 1.0);
    CHECK(all[0].zbar == 20.5);
    CHECK(all[1].zbar == 5.0);
    CHECK(std::isnan(all[1].zbar_se));
}

TEST_CASE("predictive checks flag a fit that ignores heaping") {
    // Reports generated from the heaping model; the check under the true
    // parameters covers the heap at 20, a fit without heaping does not.
    const IntensityState truth = lnm_state(1);
    std::vector<UnitRecord> sample;
    for (int i = 0; i < 900; ++i) {
        Stream s(123, {7, static_cast<std::uint64_t>(i)});
        const double x = s.uniform() < 0.4 ? 1.0 : 0.0;
        const MixtureAt m = mixture_at(std::vector<double>{x}, 0, truth.theta);
        const UnitDraw u = predict_unit(s, std::nullopt, m, std::nullopt, HeapingMode::full);
        const LevelProbs p = heaping_probs(u.z, *truth.gamma);
        const double v = s.uniform();
        const HeapingLevel g = v < p.one ? HeapingLevel::one : v < p.one + p.five ? HeapingLevel::five : HeapingLevel::ten;
        sample.push_back(unit(0, x, 1, coarsen(u.z, g).value));
    }
    const ModelSpec coarse{ModelKind::lnm_c, HeapingMode::full};
    const std::vector<IntensityState> good(200, truth);
    const PpcResult ok = ppc_stats(sample, coarse, good, {}, 5);
    CHECK(ok.counts[19].inside());
    CHECK(ok.cdf.size() == 20);
    CHECK(!ok.participation);

    IntensityState plain = truth;
    plain.gamma.reset();
    const ModelSpec face{ModelKind::lnm, HeapingMode::full};
    const std::vector<IntensityState> bad(200, plain);
    const PpcResult miss = ppc_stats(sample, face, bad, {}, 5);
    CHECK(!miss.counts[19].inside());
    CHECK(miss.counts[19].observed > miss.counts[19].hi);

    const std::vector<ParticipationParams> delta(200, participation(1));
    const PpcResult with_w = ppc_stats(sample, coarse, good, delta, 5);
    REQUIRE(with_w.participation);
    CHECK(with_w.participation->observed == 1.0);
    CHECK(!with_w.participation->inside());
}
