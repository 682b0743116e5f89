#pragma once

#include <cstddef>

#include "empcal/control_data.hpp"
#include "empcal/interval.hpp"

namespace empcal {

// Bias ~ N(a + b*theta, c + d*|theta|) where theta is the log true effect.
struct SystematicErrorModel {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double d = 0.0;
    std::size_t n_controls = 0;
    double log_likelihood = 0.0;
    // |theta| range the model was fitted over; c + d*|theta| >= 0 holds on it.
    double theta_abs_max = 0.0;

    double bias_mean(double theta) const { return a + b * theta; }
    double bias_variance(double theta) const;
};

double systematic_log_likelihood(const ControlSet& controls, const SystematicErrorModel& model);

// Maximum marginal likelihood over (a, b, c, d). Needs at least two distinct
// true effect sizes.
SystematicErrorModel fit_systematic(const ControlSet& controls);

// Equal-tailed interval: the lower bound is where the estimate sits at the
// (1 + level)/2 quantile of its sampling distribution, the upper bound where
// it sits at (1 - level)/2. Roots are bracketed and bisected to 1e-8.
CalibratedInterval calibrated_ci(const SystematicErrorModel& model, double log_estimate, double se,
                                 double level = 0.95);

}  // namespace empcal
