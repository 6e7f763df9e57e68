#include "doctest.h"

#include "heapsae/posterior.hpp"
#include "heapsae/numeric.hpp"

#include <cmath>
#include <stdexcept>

using namespace heapsae;

namespace {

std::vector<UnitRecord> small_data(HeapingMode mode, std::uint64_t seed) {
    std::vector<UnitRecord> out;
    Stream s(seed, 0);
    for (int i = 0; i < 150; ++i) {
        UnitRecord r;
        r.domain = i % 4;
        r.x = {s.uniform() < 0.4 ? 1.0 : 0.0, s.normal()};
        r.w = 1;
        const double z = std::exp((s.uniform() < 0.6 ? 1.7 : 2.7) + 0.4 * s.normal());
        const double u = s.uniform();
        HeapingLevel g = u < 0.5 ? HeapingLevel::one : HeapingLevel::five;
        if (mode == HeapingMode::full && u > 0.85) {
            g = HeapingLevel::ten;
        }
        r.answer = coarsen(z, g, mode);
        out.push_back(r);
    }
    return out;
}

std::vector<UnitRecord> participation_data(std::uint64_t seed) {
    std::vector<UnitRecord> out;
    Stream s(seed, 0);
    for (int i = 0; i < 200; ++i) {
        out.push_back(UnitRecord{i % 4, {s.normal()}, s.uniform() < 0.3 ? 1 : 0, std::nullopt});
    }
    return out;
}

std::vector<double> random_point(Stream& s, std::size_t n) {
    std::vector<double> q(n);
    for (double& v : q) {
        v = 1.6 * s.uniform() - 0.8;
    }
    return q;
}

void check_gradient(const LogDensity& target, std::span<const double> q) {
    std::vector<double> grad(target.dim());
    const double f = target.log_density(q, grad);
    REQUIRE(std::isfinite(f));
    std::vector<double> work(q.begin(), q.end());
    const double h = 1e-5;
    for (std::size_t i = 0; i < q.size(); ++i) {
        work[i] = q[i] + h;
        const double up = target.log_density(work);
        work[i] = q[i] - h;
        const double dn = target.log_density(work);
        work[i] = q[i];
        const double fd = (up - dn) / (2.0 * h);
        CHECK(std::abs(fd - grad[i]) <= 1e-4 * std::max(1.0, std::abs(grad[i])));
    }
}

}  // namespace

TEST_CASE("model kind names") {
    for (ModelKind k : kAllModels) {
        CHECK(model_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(model_kind_from_string("LNX"), std::invalid_argument);
    CHECK(ModelSpec{ModelKind::lnm_c}.coarsened());
    CHECK(ModelSpec{ModelKind::ln}.components() == 1);
}

TEST_CASE("transform examples") {
    const auto records = small_data(HeapingMode::full, 1);
    const IntensityData data = IntensityData::from_records(records, 4);
    const IntensityPosterior post(data, ModelSpec{ModelKind::lnm_c, HeapingMode::full}, PriorConfig{});
    Stream s(2, 0);
    std::vector<double> q = random_point(s, post.dim());
    IntensityState state = post.to_constrained(q);
    state.theta.sigma1 = 1.0;
    state.gamma = HeapingParams::full(7.0, 9.7, -3.4);
    const auto u = post.to_unconstrained(state);
    const auto names = post.unconstrained_names();
    REQUIRE(names.size() == post.dim());
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == "log_sigma1") {
            CHECK(u[i] == 0.0);
        }
        if (names[i] == "gamma01") {
            CHECK(u[i] == 7.0);
        }
        if (names[i] == "log_gap_gamma") {
            CHECK(u[i] == doctest::Approx(std::log(2.7)).epsilon(1e-14));
        }
    }
    IntensityState bad = state;
    bad.theta.beta0_mu2 = bad.theta.beta0_mu1 - 0.1;
    CHECK_THROWS_AS(post.to_unconstrained(bad), std::invalid_argument);
}

TEST_CASE("transforms round trip") {
    Stream s(3, 0);
    for (ModelKind kind : kAllModels) {
        for (HeapingMode mode : {HeapingMode::full, HeapingMode::reduced}) {
            const auto records = small_data(mode, 4);
            const IntensityPosterior post(IntensityData::from_records(records, 4), ModelSpec{kind, mode},
                                          PriorConfig{});
            CHECK(post.output_names().size() == post.output_values(std::vector<double>(post.dim())).size());
            for (int i = 0; i < 20; ++i) {
                const auto q = random_point(s, post.dim());
                const auto back = post.to_unconstrained(post.to_constrained(q));
                for (std::size_t k = 0; k < q.size(); ++k) {
                    CHECK(back[k] == doctest::Approx(q[k]).epsilon(1e-12).scale(1.0));
                }
                const auto out = post.output_values(q);
                const auto again = post.to_unconstrained(post.from_output(out));
                for (std::size_t k = 0; k < q.size(); ++k) {
                    CHECK(again[k] == doctest::Approx(q[k]).epsilon(1e-12).scale(1.0));
                }
            }
        }
    }
    const ParticipationPosterior part(ParticipationData::from_records(participation_data(5), 4), PriorConfig{});
    for (int i = 0; i < 20; ++i) {
        const auto q = random_point(s, part.dim());
        const auto back = part.to_unconstrained(part.from_output(part.output_values(q)));
        for (std::size_t k = 0; k < q.size(); ++k) {
            CHECK(back[k] == doctest::Approx(q[k]).epsilon(1e-12).scale(1.0));
        }
    }
}

TEST_CASE("unconstrained density equals the constrained posterior plus the log-Jacobian") {
    Stream s(6, 0);
    for (ModelKind kind : kAllModels) {
        const HeapingMode mode = kind == ModelKind::ln_c ? HeapingMode::reduced : HeapingMode::full;
        const auto records = small_data(mode, 7);
        const IntensityData data = IntensityData::from_records(records, 4);
        PriorConfig cfg = PriorConfig::from_answers(data.answers(mode));
        const ModelSpec spec{kind, mode};
        const IntensityPosterior post(data, spec, cfg);
        for (int i = 0; i < 10; ++i) {
            const auto q = random_point(s, post.dim());
            double lj = 0.0;
            const IntensityState st = post.to_constrained(q, &lj);
            const double ref = log_posterior_intensity(data, st.theta, st.gamma, spec.observation(), cfg) + lj;
            CHECK(post.log_density(q) == doctest::Approx(ref).epsilon(1e-10));
        }
    }
    const ParticipationData pdata = ParticipationData::from_records(participation_data(8), 4);
    const ParticipationPosterior part(pdata, PriorConfig{});
    for (int i = 0; i < 10; ++i) {
        const auto q = random_point(s, part.dim());
        double lj = 0.0;
        const ParticipationParams delta = part.to_constrained(q, &lj);
        CHECK(part.log_density(q) ==
              doctest::Approx(log_posterior_participation(pdata, delta, PriorConfig{}) + lj).epsilon(1e-10));
    }
}

TEST_CASE("analytic gradients match central differences") {
    Stream s(9, 0);
    for (ModelKind kind : kAllModels) {
        for (HeapingMode mode : {HeapingMode::full, HeapingMode::reduced}) {
            const auto records = small_data(mode, 10);
            const IntensityData data = IntensityData::from_records(records, 4);
            const IntensityPosterior post(data, ModelSpec{kind, mode}, PriorConfig::from_answers(data.answers(mode)));
            for (int i = 0; i < 5; ++i) {
                check_gradient(post, random_point(s, post.dim()));
            }
        }
    }
    const ParticipationPosterior part(ParticipationData::from_records(participation_data(11), 4), PriorConfig{});
    for (int i = 0; i < 5; ++i) {
        check_gradient(part, random_point(s, part.dim()));
    }
}

TEST_CASE("face-value models honour the top-code flag") {
    const auto records = small_data(HeapingMode::full, 12);
    const IntensityData data = IntensityData::from_records(records, 4);
    ModelSpec censored{ModelKind::lnm, HeapingMode::full, true};
    ModelSpec face{ModelKind::lnm, HeapingMode::full, false};
    const IntensityPosterior a(data, censored, PriorConfig{});
    const IntensityPosterior b(data, face, PriorConfig{});
    Stream s(13, 0);
    const auto q = random_point(s, a.dim());
    bool any21 = false;
    for (const auto& r : records) {
        any21 = any21 || r.answer->value == 21;
    }
    if (any21) {
        CHECK(a.log_density(q) != b.log_density(q));
    }
    check_gradient(b, q);
}
