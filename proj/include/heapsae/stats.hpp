#pragma once

// Posterior summaries shared by the sampler, predictor and study harness.

#include <span>
#include <vector>

namespace heapsae {

struct Summary {
    double mean = 0.0;
    double sd = 0.0;
    double q05 = 0.0;
    double q95 = 0.0;
};

/// Compensated sum.
double accurate_sum(std::span<const double> values);
double mean(std::span<const double> values);
/// Sample variance with divisor n - 1.
double variance(std::span<const double> values);

/// Linear-interpolation quantile on the sorted sample (position (n - 1) p).
double quantile(std::span<const double> values, double p);
double quantile_sorted(std::span<const double> sorted, double p);

/// Mean, standard deviation and the 5% and 95% quantiles. Needs at least two draws.
Summary summarize(std::span<const double> draws);

}  // namespace heapsae
