#include "heapsae/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace heapsae {

double accurate_sum(std::span<const double> values) {
    double sum = 0.0;
    double c = 0.0;
    for (double v : values) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    return sum + c;
}

double mean(std::span<const double> values) {
    if (values.empty()) {
        throw std::invalid_argument("mean of an empty sample");
    }
    return accurate_sum(values) / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
    if (values.size() < 2) {
        throw std::invalid_argument("variance needs at least two values");
    }
    const double m = mean(values);
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        sq[i] = (values[i] - m) * (values[i] - m);
    }
    return accurate_sum(sq) / static_cast<double>(values.size() - 1);
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) {
        throw std::invalid_argument("quantile of an empty sample");
    }
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("quantile level must lie in [0, 1]");
    }
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> values, double p) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return quantile_sorted(sorted, p);
}

Summary summarize(std::span<const double> draws) {
    if (draws.size() < 2) {
        throw std::invalid_argument("summaries need at least two draws");
    }
    std::vector<double> sorted(draws.begin(), draws.end());
    std::sort(sorted.begin(), sorted.end());
    Summary s;
    s.mean = mean(draws);
    s.sd = std::sqrt(variance(draws));
    s.q05 = quantile_sorted(sorted, 0.05);
    s.q95 = quantile_sorted(sorted, 0.95);
    // Rounding can push a constant sample's mean off its value.
    s.mean = std::clamp(s.mean, sorted.front(), sorted.back());
    return s;
}

}  // namespace heapsae
