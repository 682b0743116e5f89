#pragma once

#include <cmath>
#include <limits>
#include <random>

namespace empcal::detail {

// Univariate slice sampler with stepping out and shrinkage, restricted to
// the open interval (lower, upper). log_density may return -inf outside
// the support.
template <class LogDensity, class Rng>
double slice_sample(double x0, const LogDensity& log_density, double width, double lower, double upper, Rng& rng,
                    int max_steps = 64) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);
    const double log_y = log_density(x0) - expo(rng);

    double left = x0 - width * unif(rng);
    double right = left + width;
    int j = static_cast<int>(std::floor(max_steps * unif(rng)));
    int k = max_steps - 1 - j;
    while (j-- > 0 && left > lower && log_density(left) > log_y) left -= width;
    while (k-- > 0 && right < upper && log_density(right) > log_y) right += width;
    if (left < lower) left = lower;
    if (right > upper) right = upper;

    for (int iter = 0; iter < 200; ++iter) {
        const double x1 = left + (right - left) * unif(rng);
        if (x1 > lower && x1 < upper && log_density(x1) > log_y) return x1;
        if (x1 < x0)
            left = x1;
        else
            right = x1;
    }
    return x0;
}

// Running window used to adapt slice widths during burn-in.
class WidthAdapter {
public:
    explicit WidthAdapter(double initial) : width_(initial) {}

    double width() const { return width_; }

    void observe(double x) {
        ++count_;
        const double delta = x - mean_;
        mean_ += delta / count_;
        m2_ += delta * (x - mean_);
        if (count_ == kWindow) {
            const double sd = std::sqrt(m2_ / (count_ - 1));
            if (sd > 0.0 && std::isfinite(sd)) width_ = 2.0 * sd;
            count_ = 0;
            mean_ = m2_ = 0.0;
        }
    }

private:
    static constexpr int kWindow = 50;
    double width_;
    int count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

}  // namespace empcal::detail
