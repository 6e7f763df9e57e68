#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace heapsae {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))
inline constexpr double kLogSqrt2OverPi = -0.22579135264472743236;  // log(sqrt(2 / pi))
inline constexpr double kInvSqrt2 = 0.70710678118654752440;

inline double expit(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double log1pexp(double x) {
    if (x > 35.0) {
        return x;
    }
    if (x < -35.0) {
        return std::exp(x);
    }
    return std::log1p(std::exp(x));
}

inline double log_sum_exp(double a, double b) {
    if (a == kNegInf) {
        return b;
    }
    if (b == kNegInf) {
        return a;
    }
    const double m = a > b ? a : b;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double log_sum_exp(std::span<const double> values);

inline double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x - kLogSqrt2Pi);
}

inline double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x * kInvSqrt2);
}

/// Lower and upper tail of the standard normal, each computed to full
/// relative precision on its small side.
struct NormalTails {
    double lower;
    double upper;
};

inline NormalTails std_normal_tails(double x) {
    if (x < 0.0) {
        const double lower = 0.5 * std::erfc(-x * kInvSqrt2);
        return {lower, 1.0 - lower};
    }
    const double upper = 0.5 * std::erfc(x * kInvSqrt2);
    return {1.0 - upper, upper};
}

inline double normal_logpdf(double x, double mean, double sd) {
    const double r = (x - mean) / sd;
    return -0.5 * r * r - std::log(sd) - kLogSqrt2Pi;
}

}  // namespace heapsae
