#include "doctest.h"

#include "heapsae/model.hpp"
#include "heapsae/numeric.hpp"
#include "heapsae/rng.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <stdexcept>

using namespace heapsae;

namespace {

IntensityParams simple_ln(double mu, double sigma) {
    IntensityParams t;
    t.components = 1;
    t.beta0_mu1 = mu;
    t.beta_mu = {0.0};
    t.u_mu = {0.0};
    t.sigma1 = sigma;
    return t;
}

IntensityParams random_lnm(Stream& s, int domains) {
    IntensityParams t;
    t.beta0_mu1 = 3.0 * s.uniform();
    t.beta0_mu2 = t.beta0_mu1 + 0.1 + 1.5 * s.uniform();
    t.beta_mu = {0.4 * s.normal()};
    t.beta_pi = {0.4 * s.normal()};
    t.sigma1 = 0.2 + s.uniform();
    t.sigma2 = 0.2 + s.uniform();
    t.tau_mu = 0.3;
    t.tau_pi = 0.3;
    t.beta0_pi = s.normal();
    for (int d = 0; d < domains; ++d) {
        t.u_mu.push_back(0.3 * s.normal());
        t.u_pi.push_back(0.3 * s.normal());
    }
    return t;
}

// Independent transcriptions of the prior densities.
double ref_normal(double x, double m, double s) {
    return std::log(1.0 / (s * std::sqrt(2.0 * M_PI))) - (x - m) * (x - m) / (2.0 * s * s);
}

double ref_ghn(double x, double a, double b) {
    return std::log(std::sqrt(2.0 / M_PI) * (a / x) * std::pow(x / b, a) * std::exp(-0.5 * std::pow(x / b, 2.0 * a)));
}

double ref_hn(double x, double s) {
    return std::log(std::sqrt(2.0 / M_PI) / s) - x * x / (2.0 * s * s);
}

}  // namespace

TEST_CASE("participation and mixing probabilities") {
    ParticipationParams d;
    d.beta = {0.0};
    d.u = {0.0, 0.0};
    const std::vector<double> x0{0.0};
    CHECK(participation_prob(x0, 0, d) == doctest::Approx(0.5));
    d.beta0 = 0.6;
    CHECK(participation_prob(x0, 1, d) == doctest::Approx(0.6457).epsilon(1e-4));
    double prev = 0.0;
    for (double b = -3.0; b < 3.0; b += 0.5) {
        d.beta0 = b;
        const double v = participation_prob(x0, 0, d);
        CHECK(v > prev);
        prev = v;
    }
    const std::vector<double> x2{0.0, 1.0};
    CHECK_THROWS_AS(participation_prob(x2, 0, d), std::invalid_argument);
    CHECK_THROWS_AS(participation_prob(x0, 2, d), std::invalid_argument);

    IntensityParams t;
    t.beta_mu = {0.05};
    t.beta_pi = {0.2};
    t.u_mu = {0.0};
    t.u_pi = {0.0};
    t.beta0_pi = 0.0;
    CHECK(mixing_prob(x0, 0, t) == doctest::Approx(0.5));
    t.beta0_pi = 0.4;
    const std::vector<double> x1{1.0};
    CHECK(mixing_prob(x1, 0, t) == doctest::Approx(0.6457).epsilon(1e-4));
}

TEST_CASE("mixture locations") {
    IntensityParams t;
    t.beta0_mu1 = 1.7;
    t.beta0_mu2 = 2.7;
    t.beta_mu = {0.05};
    t.beta_pi = {0.0};
    t.u_mu = {0.0, 0.3};
    t.u_pi = {0.0, 0.0};
    const std::vector<double> x0{0.0};
    const std::vector<double> x1{1.0};
    CHECK(mixture_location(x0, 0, 1, t) == 1.7);
    CHECK(mixture_location(x1, 0, 1, t) == doctest::Approx(1.75));
    for (int d = 0; d < 2; ++d) {
        for (const auto& x : {x0, x1}) {
            CHECK(mixture_location(x, d, 2, t) - mixture_location(x, d, 1, t) == doctest::Approx(1.0));
        }
    }
    CHECK_THROWS_AS(mixture_location(x0, 0, 3, t), std::invalid_argument);
    t.components = 1;
    CHECK_THROWS_AS(mixture_location(x0, 0, 2, t), std::invalid_argument);
}

TEST_CASE("lognormal mixture cdf and pdf") {
    const IntensityParams ln = simple_ln(0.0, 1.0);
    const std::vector<double> x{0.0};
    CHECK(lnm_cdf(1.5, x, 0, ln) == doctest::Approx(0.6574).epsilon(1e-4));
    CHECK_THROWS_AS(lnm_cdf(0.0, x, 0, ln), std::invalid_argument);
    CHECK_THROWS_AS(lnm_pdf(-1.0, x, 0, ln), std::invalid_argument);

    MixtureAt m{2, 0.0, 0.3, 1.2, 0.7, 0.4};
    MixtureAt single{1, 1.0, 1.2, 0.0, 0.4, 1.0};
    for (double z : {0.2, 1.0, 3.3, 12.0}) {
        CHECK(m.cdf(z) == doctest::Approx(single.cdf(z)).epsilon(1e-15));
        CHECK(m.pdf(z) == doctest::Approx(single.pdf(z)).epsilon(1e-15));
    }

    Stream s(5, 0);
    boost::math::quadrature::tanh_sinh<double> integrator;
    for (int i = 0; i < 20; ++i) {
        const IntensityParams t = random_lnm(s, 3);
        const std::vector<double> xi{s.normal()};
        const MixtureAt mix = mixture_at(xi, i % 3, t);
        const double total =
            integrator.integrate([&](double z) { return mix.pdf(z); }, 0.0, std::numeric_limits<double>::infinity());
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
        double prev = 0.0;
        for (double z : {0.5, 2.0, 7.5, 20.0}) {
            const double integral = integrator.integrate([&](double v) { return mix.pdf(v); }, 0.0, z);
            CHECK(mix.cdf(z) == doctest::Approx(integral).epsilon(1e-6));
            CHECK(mix.cdf(z) >= prev);
            CHECK(mix.cdf(z) + mix.ccdf(z) == doctest::Approx(1.0).epsilon(1e-14));
            CHECK(mix.logpdf(z) == doctest::Approx(std::log(mix.pdf(z))).epsilon(1e-12));
            prev = mix.cdf(z);
        }
        CHECK(mix.cdf(1e-12) < 1e-12);
        CHECK(mix.cdf(1e12) == doctest::Approx(1.0));
    }
}

TEST_CASE("GHN and HN priors") {
    for (double x : {0.1, 1.0, 2.5, 7.0}) {
        CHECK(ghn_logpdf(x, 1.0, 2.0) == doctest::Approx(hn_logpdf(x, 2.0)).epsilon(1e-14));
        CHECK(ghn_logpdf(x, 1.5, 2.788) == doctest::Approx(ref_ghn(x, 1.5, 2.788)).epsilon(1e-13));
        CHECK(hn_logpdf(x, 2.0) == doctest::Approx(ref_hn(x, 2.0)).epsilon(1e-13));
    }
    boost::math::quadrature::tanh_sinh<double> integrator;
    const double total = integrator.integrate([](double x) { return std::exp(ghn_logpdf(x, 1.5, 2.788)); }, 0.0,
                                              std::numeric_limits<double>::infinity());
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(ghn_logpdf(0.0, 1.5, 2.788), std::invalid_argument);
    CHECK_THROWS_AS(hn_logpdf(1.0, -2.0), std::invalid_argument);
}

TEST_CASE("log prior matches an independent implementation at prior draws") {
    Stream s(9, 0);
    PriorConfig cfg;
    cfg.mu_center = 1.9;
    cfg.mu_scale = 0.6;
    for (int i = 0; i < 50; ++i) {
        IntensityParams t;
        t.tau_mu = 2.788 * std::pow(std::abs(s.normal()), 1.0 / 1.5);
        t.sigma1 = 2.788 * std::pow(std::abs(s.normal()), 1.0 / 1.5);
        t.sigma2 = 2.788 * std::pow(std::abs(s.normal()), 1.0 / 1.5);
        t.tau_pi = 2.0 * std::abs(s.normal());
        const double a = cfg.mu_center + 2.5 * cfg.mu_scale * s.normal();
        const double b = cfg.mu_center + 2.5 * cfg.mu_scale * s.normal();
        t.beta0_mu1 = std::min(a, b);
        t.beta0_mu2 = std::max(a, b);
        t.beta_mu = {2.5 * cfg.mu_scale * s.normal(), 2.5 * cfg.mu_scale * s.normal()};
        t.beta0_pi = 2.5 * s.normal();
        t.beta_pi = {2.5 * s.normal(), 2.5 * s.normal()};
        for (int d = 0; d < 4; ++d) {
            t.u_mu.push_back(t.tau_mu * s.normal());
            t.u_pi.push_back(t.tau_pi * s.normal());
        }
        ParticipationParams p;
        p.beta0 = 2.5 * s.normal();
        p.beta = {2.5 * s.normal(), 2.5 * s.normal()};
        p.tau = 2.0 * std::abs(s.normal());
        for (int d = 0; d < 4; ++d) {
            p.u.push_back(p.tau * s.normal());
        }
        const double g1 = 2.5 * s.normal();
        const double g2 = 2.5 * s.normal();
        const HeapingParams gamma = HeapingParams::full(std::min(g1, g2), std::max(g1, g2), 2.5 * s.normal());

        double ref = ref_normal(t.beta0_mu1, 1.9, 1.5) + ref_normal(t.beta0_mu2, 1.9, 1.5) +
                     ref_ghn(t.sigma1, 1.5, 2.788) + ref_ghn(t.sigma2, 1.5, 2.788) + ref_ghn(t.tau_mu, 1.5, 2.788) +
                     ref_normal(t.beta0_pi, 0, 2.5) + ref_hn(t.tau_pi, 2.0) + ref_normal(p.beta0, 0, 2.5) +
                     ref_hn(p.tau, 2.0) + ref_normal(gamma.gamma01, 0, 2.5) + ref_normal(gamma.gamma02, 0, 2.5) +
                     ref_normal(gamma.gamma1, 0, 2.5);
        for (int j = 0; j < 2; ++j) {
            ref += ref_normal(t.beta_mu[j], 0, 1.5) + ref_normal(t.beta_pi[j], 0, 2.5) + ref_normal(p.beta[j], 0, 2.5);
        }
        for (int d = 0; d < 4; ++d) {
            ref += ref_normal(t.u_mu[d], 0, t.tau_mu) + ref_normal(t.u_pi[d], 0, t.tau_pi) +
                   ref_normal(p.u[d], 0, p.tau);
        }
        const ParameterState state{p, t, gamma};
        CHECK(log_prior(state, cfg) == doctest::Approx(ref).epsilon(1e-10));
    }
}

TEST_CASE("log prior additivity and invariant violations") {
    IntensityParams t;
    t.beta_mu = {0.1};
    t.beta_pi = {0.2};
    t.u_mu = {0.3, -0.2};
    t.u_pi = {0.1, 0.0};
    PriorConfig cfg;
    const double base = log_prior_intensity(t, cfg);
    IntensityParams t2 = t;
    t2.tau_mu *= 2.0;
    const double diff = log_prior_intensity(t2, cfg) - base;
    const double expected = ghn_logpdf(2.0, 1.5, 2.788) - ghn_logpdf(1.0, 1.5, 2.788) +
                            normal_logpdf(0.3, 0, 2) - normal_logpdf(0.3, 0, 1) + normal_logpdf(-0.2, 0, 2) -
                            normal_logpdf(-0.2, 0, 1);
    CHECK(diff == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::isfinite(base));

    IntensityParams bad = t;
    bad.beta0_mu2 = bad.beta0_mu1;
    CHECK(log_prior_intensity(bad, cfg) == kNegInf);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = t;
    bad.sigma2 = 0.0;
    CHECK(log_prior_intensity(bad, cfg) == kNegInf);
    HeapingParams g = HeapingParams::full(0.0, 1.0, 0.0);
    g.gamma02 = -1.0;
    CHECK(log_prior_heaping(g, cfg) == kNegInf);
}

TEST_CASE("prior centering from answers") {
    std::vector<ObservedAnswer> answers;
    for (int v : {1, 5, 10, 21}) {
        answers.push_back(ObservedAnswer::from_report(v));
    }
    const PriorConfig cfg = PriorConfig::from_answers(answers);
    const double m = (std::log(5.0) + std::log(10.0) + std::log(21.0)) / 4.0;
    CHECK(cfg.mu_center == doctest::Approx(m));
    double ss = 0.0;
    for (double v : {1.0, 5.0, 10.0, 21.0}) {
        ss += (std::log(v) - m) * (std::log(v) - m);
    }
    CHECK(cfg.mu_scale == doctest::Approx(std::sqrt(ss / 3.0)));
    CHECK_THROWS_AS(PriorConfig::from_answers(std::span<const ObservedAnswer>(answers.data(), 1)),
                    std::invalid_argument);
}

TEST_CASE("standardizer") {
    const std::vector<std::vector<double>> rows{{1.0, 5.0}, {3.0, 5.0}, {5.0, 5.0}};
    const Standardizer s = Standardizer::fit(rows);
    CHECK(s.mean[0] == 3.0);
    CHECK(s.sd[0] == doctest::Approx(2.0));
    CHECK(s.sd[1] == 1.0);
    const auto z = s.apply(rows[2]);
    CHECK(z[0] == doctest::Approx(1.0));
    CHECK(z[1] == 0.0);
    CHECK_THROWS_AS(s.apply(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("unit record validation") {
    UnitRecord r{0, {0.0}, 0, ObservedAnswer::from_report(3)};
    CHECK_THROWS_AS(r.validate(2, 1), std::invalid_argument);
    r.w = 1;
    CHECK_NOTHROW(r.validate(2, 1));
    r.domain = 2;
    CHECK_THROWS_AS(r.validate(2, 1), std::invalid_argument);
}
