#include "heapsae/loo.hpp"

#include "heapsae/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace heapsae {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp_all(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) {
        return m;
    }
    double acc = 0.0;
    for (double x : v) {
        acc += std::exp(x - m);
    }
    return m + std::log(acc);
}

// Profile log-likelihood of theta for the generalized Pareto.
double profile(double theta, std::span<const double> x) {
    double k = 0.0;
    for (double v : x) {
        k += std::log1p(-theta * v);
    }
    k /= static_cast<double>(x.size());
    return std::log(-theta / k) - k - 1.0;
}

double gpd_quantile(double p, double k, double sigma) {
    return sigma * std::expm1(-k * std::log1p(-p)) / k;
}

}  // namespace

ParetoFit fit_generalized_pareto(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) {
        throw std::invalid_argument("Pareto fit needs at least two exceedances");
    }
    constexpr double prior = 3.0;
    const std::size_t m = 30 + static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
    const double xstar = x[static_cast<std::size_t>(std::floor(n / 4.0 + 0.5)) - 1];
    std::vector<double> theta(m);
    std::vector<double> ltheta(m);
    for (std::size_t j = 0; j < m; ++j) {
        theta[j] = 1.0 / x[n - 1] + (1.0 - std::sqrt(m / (j + 0.5))) / prior / xstar;
        ltheta[j] = static_cast<double>(n) * profile(theta[j], x);
    }
    const double lse = log_sum_exp_all(ltheta);
    double theta_hat = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        theta_hat += theta[j] * std::exp(ltheta[j] - lse);
    }
    double k = 0.0;
    for (double v : x) {
        k += std::log1p(-theta_hat * v);
    }
    k /= static_cast<double>(n);
    const double sigma = -k / theta_hat;
    // Shrink k towards 0.5 as in the weakly informative prior.
    constexpr double a = 10.0;
    k = k * n / (n + a) + a * 0.5 / (n + a);
    if (std::isnan(sigma)) {
        return {kInf, sigma};
    }
    return {k, sigma};
}

PsisWeights psis(std::span<const double> log_ratios) {
    const std::size_t s = log_ratios.size();
    if (s < 2) {
        throw std::invalid_argument("PSIS needs at least two draws");
    }
    PsisWeights out;
    out.log_weights.assign(log_ratios.begin(), log_ratios.end());
    const double mx = *std::max_element(out.log_weights.begin(), out.log_weights.end());
    for (double& v : out.log_weights) {
        v -= mx;
    }
    out.pareto_k = kInf;
    const auto tail = static_cast<std::size_t>(
        std::ceil(std::min(0.2 * static_cast<double>(s), 3.0 * std::sqrt(static_cast<double>(s)))));
    if (tail >= 5 && tail < s) {
        std::vector<std::size_t> order(s);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return out.log_weights[a] < out.log_weights[b]; });
        const std::size_t first = s - tail;
        std::vector<double> lw_tail(tail);
        for (std::size_t j = 0; j < tail; ++j) {
            lw_tail[j] = out.log_weights[order[first + j]];
        }
        if (std::abs(lw_tail.back() - lw_tail.front()) >= std::numeric_limits<double>::epsilon() / 100.0) {
            const double cutoff = out.log_weights[order[first - 1]];
            const double exp_cutoff = std::exp(cutoff);
            std::vector<double> exceed(tail);
            for (std::size_t j = 0; j < tail; ++j) {
                exceed[j] = std::exp(lw_tail[j]) - exp_cutoff;
            }
            const ParetoFit fit = fit_generalized_pareto(exceed);
            out.pareto_k = fit.k;
            if (std::isfinite(fit.k)) {
                for (std::size_t j = 0; j < tail; ++j) {
                    const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(tail);
                    out.log_weights[order[first + j]] = std::log(gpd_quantile(p, fit.k, fit.sigma) + exp_cutoff);
                }
            }
        }
    }
    for (double& v : out.log_weights) {
        v = std::min(v, 0.0);
    }
    return out;
}

LooResult psis_loo(const std::vector<std::vector<double>>& loglik) {
    if (loglik.size() < 2 || loglik.front().empty()) {
        throw std::invalid_argument("LOO needs at least two draws and one observation");
    }
    const std::size_t s = loglik.size();
    const std::size_t n = loglik.front().size();
    LooResult out;
    out.elpd_pointwise.resize(n);
    out.pareto_k.resize(n);
    std::vector<double> ll(s);
    std::vector<double> ratio(s);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t b = 0; b < s; ++b) {
            if (loglik[b].size() != n) {
                throw std::invalid_argument("log-likelihood rows have different lengths");
            }
            ll[b] = loglik[b][i];
            ratio[b] = -ll[b];
        }
        const PsisWeights w = psis(ratio);
        std::vector<double> joint(s);
        for (std::size_t b = 0; b < s; ++b) {
            joint[b] = w.log_weights[b] + ll[b];
        }
        out.elpd_pointwise[i] = log_sum_exp_all(joint) - log_sum_exp_all(w.log_weights);
        out.pareto_k[i] = w.pareto_k;
        if (w.pareto_k > 0.7) {
            ++out.high_k;
        }
    }
    out.elpd = accurate_sum(out.elpd_pointwise);
    out.elpd_se = std::sqrt(static_cast<double>(n) * variance(out.elpd_pointwise));
    out.looic = -2.0 * out.elpd;
    out.looic_se = 2.0 * out.elpd_se;
    return out;
}

std::vector<LooComparison> loo_compare(const std::vector<std::string>& names, const std::vector<LooResult>& results) {
    if (names.size() != results.size() || results.empty()) {
        throw std::invalid_argument("loo_compare needs one name per result");
    }
    std::vector<std::size_t> order(results.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return results[a].elpd > results[b].elpd; });
    const LooResult& best = results[order.front()];
    std::vector<LooComparison> out;
    for (std::size_t idx : order) {
        const LooResult& r = results[idx];
        if (r.elpd_pointwise.size() != best.elpd_pointwise.size()) {
            throw std::invalid_argument("compared models must share observations");
        }
        LooComparison c{names[idx], r.looic, r.looic_se, r.elpd - best.elpd, 0.0};
        if (idx != order.front()) {
            std::vector<double> diff(r.elpd_pointwise.size());
            for (std::size_t i = 0; i < diff.size(); ++i) {
                diff[i] = r.elpd_pointwise[i] - best.elpd_pointwise[i];
            }
            c.diff_se = std::sqrt(static_cast<double>(diff.size()) * variance(diff));
        }
        out.push_back(c);
    }
    return out;
}

}  // namespace heapsae
