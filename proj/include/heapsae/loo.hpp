#pragma once

// Pareto-smoothed importance-sampling leave-one-out cross-validation.

#include <span>
#include <string>
#include <vector>

namespace heapsae {

struct ParetoFit {
    double k = 0.0;
    double sigma = 0.0;
};

/// Generalized Pareto fit of exceedances sorted ascending (profile
/// likelihood over a grid with a weakly informative adjustment of k).
ParetoFit fit_generalized_pareto(std::span<const double> sorted_exceedances);

struct PsisWeights {
    /// Smoothed, truncated, unnormalized log weights.
    std::vector<double> log_weights;
    double pareto_k = 0.0;
};

PsisWeights psis(std::span<const double> log_ratios);

struct LooResult {
    std::vector<double> elpd_pointwise;
    std::vector<double> pareto_k;
    double elpd = 0.0;
    double elpd_se = 0.0;
    double looic = 0.0;
    double looic_se = 0.0;
    /// Observations with k above 0.7.
    int high_k = 0;
};

/// loglik is laid out [draw][observation].
LooResult psis_loo(const std::vector<std::vector<double>>& loglik);

struct LooComparison {
    std::string model;
    double looic = 0.0;
    double looic_se = 0.0;
    /// elpd difference to the best model (<= 0) and its standard error.
    double elpd_diff = 0.0;
    double diff_se = 0.0;
};

/// Models ordered from best (highest elpd) to worst.
std::vector<LooComparison> loo_compare(const std::vector<std::string>& names, const std::vector<LooResult>& results);

}  // namespace heapsae
