#pragma once

// Parameter containers, linear predictors, lognormal (mixture) densities and
// prior log-densities. Domains are 0-based indices throughout the library.

#include "heapsae/coarsening.hpp"

#include <optional>
#include <span>
#include <vector>

namespace heapsae {

struct UnitRecord {
    int domain = 0;
    std::vector<double> x;
    std::optional<int> w;
    std::optional<ObservedAnswer> answer;

    /// Throws std::invalid_argument on a broken record.
    void validate(int domains, std::size_t covariates) const;
};

struct ParticipationParams {
    double beta0 = 0.0;
    std::vector<double> beta;
    std::vector<double> u;
    double tau = 1.0;

    void validate() const;
};

/// Intensity block. One parameter container serves both the single lognormal
/// (components == 1) and the two-component mixture; for components == 1 only
/// beta0_mu1, beta_mu, u_mu, sigma1 and tau_mu are meaningful.
struct IntensityParams {
    int components = 2;
    double beta0_mu1 = 0.0;
    double beta0_mu2 = 1.0;
    std::vector<double> beta_mu;
    std::vector<double> u_mu;
    double sigma1 = 1.0;
    double sigma2 = 1.0;
    double tau_mu = 1.0;
    double beta0_pi = 0.0;
    std::vector<double> beta_pi;
    std::vector<double> u_pi;
    double tau_pi = 1.0;

    bool is_mixture() const { return components == 2; }
    void validate() const;
};

struct ParameterState {
    std::optional<ParticipationParams> participation;
    std::optional<IntensityParams> intensity;
    std::optional<HeapingParams> heaping;
};

struct PriorConfig {
    double intercept_sd = 2.5;
    double coef_sd = 2.5;
    double mu_center = 0.0;
    double mu_scale = 1.0;
    double hn_scale = 2.0;
    double ghn_shape = 1.5;
    double ghn_scale = 2.788;

    void validate() const;

    /// Centers the intensity intercept priors on the mean and standard
    /// deviation of log(z*) over the reported answers, 21 taken at face value.
    static PriorConfig from_answers(std::span<const ObservedAnswer> answers);
};

/// Zero-mean, unit-variance covariate transform, fitted once on the sample
/// and reused for population frames.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> sd;

    static Standardizer fit(std::span<const std::vector<double>> rows);
    std::vector<double> apply(std::span<const double> x) const;
};

double linear_predictor(double intercept, std::span<const double> beta, std::span<const double> x,
                        std::span<const double> u, int domain);

double participation_prob(std::span<const double> x, int domain, const ParticipationParams& delta);
/// Probability of mixture component 1; 1 for the single lognormal.
double mixing_prob(std::span<const double> x, int domain, const IntensityParams& theta);
/// Location of component l in {1, 2}.
double mixture_location(std::span<const double> x, int domain, int component, const IntensityParams& theta);

/// Lognormal mixture evaluated for one covariate pattern.
struct MixtureAt {
    int components = 2;
    double pi = 1.0;
    double mu1 = 0.0;
    double mu2 = 0.0;
    double sigma1 = 1.0;
    double sigma2 = 1.0;

    double cdf(double z) const;
    double ccdf(double z) const;
    double pdf(double z) const;
    double logpdf(double z) const;
};

MixtureAt mixture_at(std::span<const double> x, int domain, const IntensityParams& theta);

double lnm_cdf(double z, std::span<const double> x, int domain, const IntensityParams& theta);
double lnm_pdf(double z, std::span<const double> x, int domain, const IntensityParams& theta);

double ghn_logpdf(double x, double a, double b);
double hn_logpdf(double x, double scale);

/// Unnormalized log prior of every block present in the state. Returns -inf
/// when an ordering or positivity invariant is violated; a NaN result signals
/// numeric failure instead.
double log_prior(const ParameterState& state, const PriorConfig& config);
double log_prior_participation(const ParticipationParams& delta, const PriorConfig& config);
double log_prior_intensity(const IntensityParams& theta, const PriorConfig& config);
double log_prior_heaping(const HeapingParams& gamma, const PriorConfig& config);

}  // namespace heapsae
