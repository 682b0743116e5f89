#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

namespace empcal {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Upper tail 1 - Phi(z), accurate far into the tail.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

// log N(x; mean, variance)
inline double normal_logpdf(double x, double mean, double variance) {
    constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
    const double r = x - mean;
    return -0.5 * (kLogTwoPi + std::log(variance) + r * r / variance);
}

}  // namespace empcal
