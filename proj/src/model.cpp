#include "heapsae/model.hpp"

#include "heapsae/numeric.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace heapsae {

namespace {

bool positive(double v) {
    return v > 0.0 && std::isfinite(v);
}

bool intensity_ok(const IntensityParams& t) {
    if (t.components != 1 && t.components != 2) {
        return false;
    }
    if (!positive(t.sigma1) || !positive(t.tau_mu)) {
        return false;
    }
    if (t.is_mixture()) {
        if (!(t.beta0_mu1 < t.beta0_mu2) || !positive(t.sigma2) || !positive(t.tau_pi)) {
            return false;
        }
        if (t.beta_pi.size() != t.beta_mu.size() || t.u_pi.size() != t.u_mu.size()) {
            return false;
        }
    }
    return true;
}

double normal_sum(std::span<const double> values, double mean, double sd) {
    double acc = 0.0;
    for (double v : values) {
        acc += normal_logpdf(v, mean, sd);
    }
    return acc;
}

}  // namespace

void UnitRecord::validate(int domains, std::size_t covariates) const {
    if (domain < 0 || domain >= domains) {
        throw std::invalid_argument("domain index " + std::to_string(domain) + " outside 0.." +
                                    std::to_string(domains - 1));
    }
    if (x.size() != covariates) {
        throw std::invalid_argument("expected " + std::to_string(covariates) + " covariates, got " +
                                    std::to_string(x.size()));
    }
    if (w && *w != 0 && *w != 1) {
        throw std::invalid_argument("participation must be 0 or 1");
    }
    if (answer && w && *w != 1) {
        throw std::invalid_argument("an intensity answer requires participation = 1");
    }
}

void ParticipationParams::validate() const {
    if (!positive(tau)) {
        throw std::invalid_argument("participation tau must be positive");
    }
}

void IntensityParams::validate() const {
    if (!intensity_ok(*this)) {
        throw std::invalid_argument(
            "intensity parameters violate positivity or the beta0_mu1 < beta0_mu2 ordering");
    }
}

void PriorConfig::validate() const {
    for (double s : {intercept_sd, coef_sd, mu_scale, hn_scale, ghn_shape, ghn_scale}) {
        if (!positive(s)) {
            throw std::invalid_argument("prior scales must be positive");
        }
    }
}

PriorConfig PriorConfig::from_answers(std::span<const ObservedAnswer> answers) {
    if (answers.size() < 2) {
        throw std::invalid_argument("at least two answers are needed to center the intensity priors");
    }
    double sum = 0.0;
    for (const auto& a : answers) {
        sum += std::log(static_cast<double>(a.value));
    }
    const double n = static_cast<double>(answers.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& a : answers) {
        const double d = std::log(static_cast<double>(a.value)) - mean;
        ss += d * d;
    }
    PriorConfig cfg;
    cfg.mu_center = mean;
    cfg.mu_scale = std::sqrt(ss / (n - 1.0));
    if (!(cfg.mu_scale > 0.0)) {
        // All answers identical: fall back to a unit scale on the log axis.
        cfg.mu_scale = 1.0;
    }
    return cfg;
}

Standardizer Standardizer::fit(std::span<const std::vector<double>> rows) {
    Standardizer s;
    if (rows.empty()) {
        return s;
    }
    const std::size_t p = rows.front().size();
    s.mean.assign(p, 0.0);
    s.sd.assign(p, 1.0);
    const double n = static_cast<double>(rows.size());
    for (std::size_t j = 0; j < p; ++j) {
        double acc = 0.0;
        for (const auto& r : rows) {
            acc += r[j];
        }
        s.mean[j] = acc / n;
        double ss = 0.0;
        for (const auto& r : rows) {
            ss += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
        }
        const double sd = rows.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        // A constant covariate is only centered.
        s.sd[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
    if (x.size() != mean.size()) {
        throw std::invalid_argument("covariate vector length does not match the standardizer");
    }
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        out[j] = (x[j] - mean[j]) / sd[j];
    }
    return out;
}

double linear_predictor(double intercept, std::span<const double> beta, std::span<const double> x,
                        std::span<const double> u, int domain) {
    if (beta.size() != x.size()) {
        throw std::invalid_argument("covariate dimension mismatch");
    }
    if (domain < 0 || static_cast<std::size_t>(domain) >= u.size()) {
        throw std::invalid_argument("domain " + std::to_string(domain) + " has no random effect");
    }
    double eta = intercept + u[static_cast<std::size_t>(domain)];
    for (std::size_t j = 0; j < x.size(); ++j) {
        eta += x[j] * beta[j];
    }
    return eta;
}

double participation_prob(std::span<const double> x, int domain, const ParticipationParams& delta) {
    return expit(linear_predictor(delta.beta0, delta.beta, x, delta.u, domain));
}

double mixing_prob(std::span<const double> x, int domain, const IntensityParams& theta) {
    if (!theta.is_mixture()) {
        return 1.0;
    }
    return expit(linear_predictor(theta.beta0_pi, theta.beta_pi, x, theta.u_pi, domain));
}

double mixture_location(std::span<const double> x, int domain, int component, const IntensityParams& theta) {
    if (component != 1 && component != 2) {
        throw std::invalid_argument("mixture component label must be 1 or 2");
    }
    if (component == 2 && !theta.is_mixture()) {
        throw std::invalid_argument("single lognormal has no component 2");
    }
    const double intercept = component == 1 ? theta.beta0_mu1 : theta.beta0_mu2;
    return linear_predictor(intercept, theta.beta_mu, x, theta.u_mu, domain);
}

MixtureAt mixture_at(std::span<const double> x, int domain, const IntensityParams& theta) {
    MixtureAt m;
    m.components = theta.components;
    m.mu1 = mixture_location(x, domain, 1, theta);
    m.sigma1 = theta.sigma1;
    if (theta.is_mixture()) {
        m.pi = mixing_prob(x, domain, theta);
        m.mu2 = m.mu1 + (theta.beta0_mu2 - theta.beta0_mu1);
        m.sigma2 = theta.sigma2;
    }
    return m;
}

double MixtureAt::cdf(double z) const {
    if (!(z > 0.0)) {
        throw std::invalid_argument("lognormal mixture CDF requires z > 0");
    }
    const double lz = std::log(z);
    const double f1 = std_normal_tails((lz - mu1) / sigma1).lower;
    if (components == 1) {
        return f1;
    }
    return pi * f1 + (1.0 - pi) * std_normal_tails((lz - mu2) / sigma2).lower;
}

double MixtureAt::ccdf(double z) const {
    if (!(z > 0.0)) {
        throw std::invalid_argument("lognormal mixture CDF requires z > 0");
    }
    const double lz = std::log(z);
    const double s1 = std_normal_tails((lz - mu1) / sigma1).upper;
    if (components == 1) {
        return s1;
    }
    return pi * s1 + (1.0 - pi) * std_normal_tails((lz - mu2) / sigma2).upper;
}

double MixtureAt::pdf(double z) const {
    if (!(z > 0.0)) {
        throw std::invalid_argument("lognormal mixture density requires z > 0");
    }
    const double lz = std::log(z);
    const double f1 = std::exp(normal_logpdf(lz, mu1, sigma1) - lz);
    if (components == 1) {
        return f1;
    }
    return pi * f1 + (1.0 - pi) * std::exp(normal_logpdf(lz, mu2, sigma2) - lz);
}

double MixtureAt::logpdf(double z) const {
    if (!(z > 0.0)) {
        throw std::invalid_argument("lognormal mixture density requires z > 0");
    }
    const double lz = std::log(z);
    const double l1 = normal_logpdf(lz, mu1, sigma1) - lz;
    if (components == 1) {
        return l1;
    }
    const double l2 = normal_logpdf(lz, mu2, sigma2) - lz;
    return log_sum_exp(std::log(pi) + l1, std::log1p(-pi) + l2);
}

double lnm_cdf(double z, std::span<const double> x, int domain, const IntensityParams& theta) {
    return mixture_at(x, domain, theta).cdf(z);
}

double lnm_pdf(double z, std::span<const double> x, int domain, const IntensityParams& theta) {
    return mixture_at(x, domain, theta).pdf(z);
}

double ghn_logpdf(double x, double a, double b) {
    if (!(x > 0.0) || !(a > 0.0) || !(b > 0.0)) {
        throw std::invalid_argument("generalized half-normal density needs positive arguments");
    }
    const double lr = std::log(x / b);
    return kLogSqrt2OverPi + std::log(a) - std::log(x) + a * lr - 0.5 * std::exp(2.0 * a * lr);
}

double hn_logpdf(double x, double scale) {
    if (!(x > 0.0) || !(scale > 0.0)) {
        throw std::invalid_argument("half-normal density needs positive arguments");
    }
    return kLogSqrt2OverPi - std::log(scale) - 0.5 * (x / scale) * (x / scale);
}

double log_prior_participation(const ParticipationParams& delta, const PriorConfig& config) {
    if (!positive(delta.tau)) {
        return kNegInf;
    }
    return normal_logpdf(delta.beta0, 0.0, config.intercept_sd) + normal_sum(delta.beta, 0.0, config.coef_sd) +
           hn_logpdf(delta.tau, config.hn_scale) + normal_sum(delta.u, 0.0, delta.tau);
}

double log_prior_intensity(const IntensityParams& theta, const PriorConfig& config) {
    if (!intensity_ok(theta)) {
        return kNegInf;
    }
    const double mu_sd = config.coef_sd * config.mu_scale;
    const double intercept_sd = config.intercept_sd * config.mu_scale;
    const double a = config.ghn_shape;
    const double b = config.ghn_scale;
    double lp = normal_logpdf(theta.beta0_mu1, config.mu_center, intercept_sd) +
                normal_sum(theta.beta_mu, 0.0, mu_sd) + ghn_logpdf(theta.sigma1, a, b) +
                ghn_logpdf(theta.tau_mu, a, b) + normal_sum(theta.u_mu, 0.0, theta.tau_mu);
    if (theta.is_mixture()) {
        lp += normal_logpdf(theta.beta0_mu2, config.mu_center, intercept_sd) + ghn_logpdf(theta.sigma2, a, b) +
              normal_logpdf(theta.beta0_pi, 0.0, config.intercept_sd) +
              normal_sum(theta.beta_pi, 0.0, config.coef_sd) + hn_logpdf(theta.tau_pi, config.hn_scale) +
              normal_sum(theta.u_pi, 0.0, theta.tau_pi);
    }
    return lp;
}

double log_prior_heaping(const HeapingParams& gamma, const PriorConfig& config) {
    if (gamma.mode == HeapingMode::full && !(gamma.gamma01 < gamma.gamma02)) {
        return kNegInf;
    }
    double lp = normal_logpdf(gamma.gamma01, 0.0, config.intercept_sd) +
                normal_logpdf(gamma.gamma1, 0.0, config.coef_sd);
    if (gamma.mode == HeapingMode::full) {
        lp += normal_logpdf(gamma.gamma02, 0.0, config.intercept_sd);
    }
    return lp;
}

double log_prior(const ParameterState& state, const PriorConfig& config) {
    double lp = 0.0;
    if (state.participation) {
        lp += log_prior_participation(*state.participation, config);
    }
    if (state.intensity) {
        lp += log_prior_intensity(*state.intensity, config);
    }
    if (state.heaping) {
        lp += log_prior_heaping(*state.heaping, config);
    }
    return lp;
}

}  // namespace heapsae
