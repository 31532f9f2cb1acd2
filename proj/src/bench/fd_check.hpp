#pragma once

#include <algorithm>
#include <cmath>

namespace dorafactor::bench {

// Central-difference step sized to fp32 noise: h = 1e-3 * max(1, |theta|).
inline double fd_step(double theta) {
    return 1e-3 * std::max(1.0, std::fabs(theta));
}

inline double rel_err(double got, double want) {
    const double denom = std::max(std::fabs(got) + std::fabs(want), 1e-6);
    return std::fabs(got - want) / denom;
}

}  // namespace dorafactor::bench
