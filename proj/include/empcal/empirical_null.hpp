#pragma once

#include <cstddef>
#include <span>

#include "empcal/control_data.hpp"

namespace empcal {

// Gaussian bias distribution fitted to negative controls.
struct NullDistribution {
    double nu = 0.0;      // mean bias
    double sigma2 = 0.0;  // bias variance; 0 when the optimum sits on the boundary
    std::size_t n_controls = 0;
    double log_likelihood = 0.0;
};

// Log marginal likelihood of estimates under bias ~ N(nu, sigma2) with
// the per-estimate sampling noise integrated out in closed form.
double null_log_likelihood(std::span<const double> log_estimates, std::span<const double> standard_errors, double nu,
                           double sigma2);

// Maximum marginal likelihood fit. Every record must be a negative control
// and at least two are required.
NullDistribution fit_null(const ControlSet& negatives);
NullDistribution fit_null(std::span<const double> log_estimates, std::span<const double> standard_errors);

enum class Sidedness { TwoSided, Greater, Less };

// p-value of log_estimate against N(nu, sigma2 + se^2). With a (0, 0) null
// this is the ordinary Wald p-value.
double calibrated_p(const NullDistribution& null, double log_estimate, double se,
                    Sidedness sides = Sidedness::TwoSided);

}  // namespace empcal
