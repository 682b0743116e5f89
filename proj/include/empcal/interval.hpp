#pragma once

#include <cstdint>
#include <string>

namespace empcal {

// Interval on the log effect scale, with the procedure that produced it.
struct CalibratedInterval {
    double lower = 0.0;
    double upper = 0.0;
    std::string method;  // "calibrated" or "uncalibrated"
    std::string model;   // "constant", "linear", "frequentist", "wald"
    std::uint64_t seed = 0;

    bool contains(double x) const { return lower <= x && x <= upper; }
    double width() const { return upper - lower; }
};

// log_estimate -/+ z * se with z the two-sided quantile for level.
CalibratedInterval wald_interval(double log_estimate, double se, double level);

}  // namespace empcal
