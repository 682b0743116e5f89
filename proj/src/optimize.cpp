#include "empcal/optimize.hpp"

#include <algorithm>
#include <cmath>

namespace empcal {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

MinimizeResult minimize_bfgs(const Objective& objective, std::vector<double> x0, const MinimizeOptions& options) {
    const std::size_t n = x0.size();
    MinimizeResult result;
    std::vector<double> grad(n), trial_grad(n), step(n), trial(n);
    double value = objective(x0, grad);
    result.x = x0;
    result.value = value;
    if (!std::isfinite(value)) return result;

    // Inverse Hessian approximation, row-major.
    std::vector<double> h(n * n, 0.0);
    auto reset_h = [&] {
        std::fill(h.begin(), h.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) h[i * n + i] = 1.0;
    };
    reset_h();

    std::vector<double>& x = result.x;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        result.iterations = iter + 1;
        if (max_abs(grad) < options.gradient_tolerance) {
            result.converged = true;
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s -= h[i * n + j] * grad[j];
            step[i] = s;
        }
        double slope = dot(step, grad);
        if (!(slope < 0.0)) {
            reset_h();
            for (std::size_t i = 0; i < n; ++i) step[i] = -grad[i];
            slope = dot(step, grad);
        }

        double alpha = 1.0;
        double trial_value = 0.0;
        bool accepted = false;
        for (int k = 0; k < 60; ++k) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + alpha * step[i];
            trial_value = objective(trial, trial_grad);
            if (std::isfinite(trial_value) && trial_value <= value + 1e-4 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // No descent along the quasi-Newton direction; a stationary point
            // to working precision counts as convergence.
            result.converged = max_abs(grad) < 1e-5;
            break;
        }

        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = trial[i] - x[i];
            y[i] = trial_grad[i] - grad[i];
        }
        const double change = value - trial_value;
        x = trial;
        grad = trial_grad;
        value = trial_value;

        const double sy = dot(s, y);
        if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
            std::vector<double> hy(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) hy[i] += h[i * n + j] * y[j];
            const double yhy = dot(y, hy);
            const double rho = 1.0 / sy;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    h[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
        }
        if (std::abs(change) <= options.function_tolerance * (1.0 + std::abs(value)) &&
            max_abs(grad) < std::sqrt(options.gradient_tolerance)) {
            result.converged = true;
            break;
        }
    }
    result.value = value;
    return result;
}

}  // namespace empcal
