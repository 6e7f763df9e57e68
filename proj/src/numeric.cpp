#include "heapsae/numeric.hpp"

#include <algorithm>

namespace heapsae {

double log_sum_exp(std::span<const double> values) {
    if (values.empty()) {
        return kNegInf;
    }
    const double m = *std::max_element(values.begin(), values.end());
    if (m == kNegInf || !std::isfinite(m)) {
        return m;
    }
    double acc = 0.0;
    for (double v : values) {
        acc += std::exp(v - m);
    }
    return m + std::log(acc);
}

}  // namespace heapsae
