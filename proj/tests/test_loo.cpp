#include "doctest.h"

#include "heapsae/loo.hpp"
#include "heapsae/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace heapsae;

TEST_CASE("generalized Pareto fit recovers the shape") {
    for (double k : {0.2, 0.5}) {
        const double sigma = 2.0;
        Stream s(3, {static_cast<std::uint64_t>(k * 10)});
        std::vector<double> x(20000);
        for (double& v : x) {
            v = sigma * std::expm1(-k * std::log1p(-s.uniform())) / k;
        }
        std::sort(x.begin(), x.end());
        const ParetoFit fit = fit_generalized_pareto(x);
        CHECK(fit.k == doctest::Approx(k).epsilon(0.1));
        CHECK(fit.sigma == doctest::Approx(sigma).epsilon(0.05));
    }
}

TEST_CASE("equal importance ratios leave uniform weights") {
    const std::vector<double> r(1000, 2.5);
    const PsisWeights w = psis(r);
    for (double v : w.log_weights) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("smoothed weights are truncated at the largest raw weight") {
    Stream s(8, 0);
    std::vector<double> r(2000);
    for (double& v : r) {
        v = 1.5 * s.normal();
    }
    const PsisWeights w = psis(r);
    CHECK(std::isfinite(w.pareto_k));
    CHECK(*std::max_element(w.log_weights.begin(), w.log_weights.end()) <= 0.0);
    // Only the tail is replaced; the bulk keeps the shifted raw ratios.
    const double mx = *std::max_element(r.begin(), r.end());
    std::size_t unchanged = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        unchanged += w.log_weights[i] == r[i] - mx;
    }
    CHECK(unchanged >= r.size() - 135);
}

TEST_CASE("leave-one-out matches the exact normal-mean answer") {
    // y_i ~ N(theta, 1) with a flat prior: theta | y ~ N(ybar, 1/n) and the
    // held-out predictive is N(ybar_{-i}, 1 + 1/(n - 1)).
    const int n = 30;
    Stream s(21, 0);
    std::vector<double> y(n);
    for (double& v : y) {
        v = 0.7 + s.normal();
    }
    double ybar = 0.0;
    for (double v : y) {
        ybar += v;
    }
    ybar /= n;
    const int draws = 8000;
    std::vector<std::vector<double>> ll(draws, std::vector<double>(n));
    for (int b = 0; b < draws; ++b) {
        const double theta = ybar + s.normal() / std::sqrt(double(n));
        for (int i = 0; i < n; ++i) {
            ll[b][i] = -0.5 * std::log(2 * std::numbers::pi) - 0.5 * (y[i] - theta) * (y[i] - theta);
        }
    }
    const LooResult r = psis_loo(ll);
    double exact = 0.0;
    for (int i = 0; i < n; ++i) {
        const double m = (ybar * n - y[i]) / (n - 1);
        const double v = 1.0 + 1.0 / (n - 1);
        const double e = -0.5 * std::log(2 * std::numbers::pi * v) - 0.5 * (y[i] - m) * (y[i] - m) / v;
        CHECK(r.elpd_pointwise[i] == doctest::Approx(e).epsilon(0.01));
        exact += e;
    }
    CHECK(r.elpd == doctest::Approx(exact).epsilon(0.005));
    CHECK(r.looic == doctest::Approx(-2.0 * r.elpd));
    CHECK(r.high_k == 0);
}

TEST_CASE("model comparison orders by expected log predictive density") {
    LooResult a;
    a.elpd_pointwise = {-1.0, -2.0, -1.5};
    a.elpd = -4.5;
    a.looic = 9.0;
    LooResult b;
    b.elpd_pointwise = {-1.2, -2.1, -2.0};
    b.elpd = -5.3;
    b.looic = 10.6;
    const auto cmp = loo_compare({"B", "A"}, {b, a});
    CHECK(cmp[0].model == "A");
    CHECK(cmp[0].elpd_diff == 0.0);
    CHECK(cmp[1].elpd_diff == doctest::Approx(-0.8));
    // Differences 0.2, 0.1, 0.5: sd 0.2082, times sqrt(3).
    CHECK(cmp[1].diff_se == doctest::Approx(std::sqrt(3.0 * 0.04333333333)).epsilon(1e-6));
}
