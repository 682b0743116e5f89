#include "empcal/systematic_error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "empcal/error.hpp"
#include "empcal/normal.hpp"
#include "empcal/optimize.hpp"

namespace empcal {

CalibratedInterval wald_interval(double log_estimate, double se, double level) {
    if (!(level > 0.0 && level < 1.0)) throw UsageError("confidence level must lie in (0, 1)");
    const double z = normal_quantile(0.5 + 0.5 * level);
    return {log_estimate - z * se, log_estimate + z * se, "uncalibrated", "wald", 0};
}

double SystematicErrorModel::bias_variance(double theta) const { return c + d * std::abs(theta); }

double systematic_log_likelihood(const ControlSet& controls, const SystematicErrorModel& model) {
    double ll = 0.0;
    for (const auto& r : controls.records) {
        const double theta = r.log_true_effect();
        ll += normal_logpdf(r.log_estimate, theta + model.bias_mean(theta),
                            model.bias_variance(theta) + r.se_log_estimate * r.se_log_estimate);
    }
    return ll;
}

SystematicErrorModel fit_systematic(const ControlSet& controls) {
    std::vector<double> theta, est, se2;
    std::set<double> levels;
    for (std::size_t i = 0; i < controls.records.size(); ++i) {
        const auto& r = controls.records[i];
        if (!r.is_control())
            throw ValidationError("fit_systematic: record " + std::to_string(i + 1) + " has no true effect size");
        theta.push_back(r.log_true_effect());
        est.push_back(r.log_estimate);
        se2.push_back(r.se_log_estimate * r.se_log_estimate);
        levels.insert(theta.back());
    }
    if (levels.size() < 2)
        throw ValidationError("fit_systematic: controls need at least two distinct true effect sizes");
    const std::size_t n = theta.size();
    double theta_max = 0.0;
    for (double t : theta) theta_max = std::max(theta_max, std::abs(t));

    // x = (a, b, log var at |theta| = 0, log var at |theta| = theta_max).
    // The bias variance is linear in |theta| between the two anchors, so it
    // stays positive over the whole fitted window. An anchor may also be
    // pinned at zero variance; those faces are fitted as separate candidates.
    auto make_objective = [&](bool free0, bool free1) -> Objective {
        return [&, free0, free1](const std::vector<double>& x, std::vector<double>& g) {
            const double v0 = free0 ? std::exp(x[2]) : 0.0;
            const double v1 = free1 ? std::exp(x[3]) : 0.0;
            g.assign(4, 0.0);
            double value = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double frac = std::abs(theta[i]) / theta_max;
                const double v = v0 * (1.0 - frac) + v1 * frac + se2[i];
                const double r = est[i] - theta[i] - x[0] - x[1] * theta[i];
                value -= normal_logpdf(est[i], theta[i] + x[0] + x[1] * theta[i], v);
                const double dv = 0.5 * (1.0 / v - r * r / (v * v));
                g[0] -= r / v;
                g[1] -= theta[i] * r / v;
                g[2] += dv * v0 * (1.0 - frac);
                g[3] += dv * v1 * frac;
            }
            return value;
        };
    };

    double mean_bias = 0.0, mean_se2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_bias += est[i] - theta[i];
        mean_se2 += se2[i];
    }
    mean_bias /= static_cast<double>(n);
    mean_se2 /= static_cast<double>(n);
    double spread = 0.0;
    for (std::size_t i = 0; i < n; ++i) spread += std::pow(est[i] - theta[i] - mean_bias, 2);
    spread /= static_cast<double>(n - 1);
    const double moments = std::max(spread - mean_se2, 1e-4 * mean_se2);

    const std::vector<std::vector<double>> starts = {
        {mean_bias, 0.0, std::log(moments), std::log(moments)},
        {0.0, 0.0, std::log(std::max(spread, 1e-4 * mean_se2)), std::log(std::max(spread, 1e-4 * mean_se2))}};

    struct Candidate {
        MinimizeResult fit;
        bool free0, free1;
    };
    std::optional<Candidate> best;
    bool any_finite = false;
    for (const auto& [free0, free1] : {std::pair{true, true}, {true, false}, {false, true}, {false, false}}) {
        const auto objective = make_objective(free0, free1);
        for (const auto& start : starts) {
            auto fit = minimize_bfgs(objective, start, {.max_iterations = 1000});
            any_finite = any_finite || std::isfinite(fit.value);
            if (!fit.converged || !std::isfinite(fit.value)) continue;
            if (!best || fit.value < best->fit.value) best = Candidate{fit, free0, free1};
        }
    }
    if (!any_finite) throw NumericalError("fit_systematic: likelihood not finite at any start");
    if (!best) throw NumericalError("fit_systematic: optimizer did not converge within 1000 iterations");
    const auto& fit = best->fit;

    SystematicErrorModel model;
    model.a = fit.x[0];
    model.b = fit.x[1];
    const double v0 = best->free0 ? std::exp(fit.x[2]) : 0.0;
    const double v1 = best->free1 ? std::exp(fit.x[3]) : 0.0;
    model.c = v0;
    model.d = (v1 - v0) / theta_max;
    model.theta_abs_max = theta_max;
    model.n_controls = n;
    model.log_likelihood = -fit.value;
    return model;
}

namespace {

struct RootProblem {
    const SystematicErrorModel& model;
    double log_estimate;
    double se2;

    // Probability that a fresh estimate falls below log_estimate when the
    // true log effect is theta0.
    double cdf_at(double theta0) const {
        const double v = model.bias_variance(theta0) + se2;
        if (!(v > 0.0))
            throw NumericalError("calibrated_ci: model variance non-positive at theta0 = " + std::to_string(theta0));
        return normal_cdf((log_estimate - theta0 - model.bias_mean(theta0)) / std::sqrt(v));
    }
};

double bisect(const RootProblem& problem, double target, double lo, double hi) {
    double f_lo = problem.cdf_at(lo) - target;
    double f_hi = problem.cdf_at(hi) - target;
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if ((f_lo > 0.0) == (f_hi > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    while (hi - lo > 1e-8) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = problem.cdf_at(mid) - target;
        if ((f_mid > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

CalibratedInterval calibrated_ci(const SystematicErrorModel& model, double log_estimate, double se, double level) {
    if (!(se > 0.0) || !std::isfinite(se)) throw ValidationError("calibrated_ci: se must be positive and finite");
    if (!(level > 0.0 && level < 1.0)) throw UsageError("calibrated_ci: level must lie in (0, 1)");
    if (!(1.0 + model.b > 0.0))
        throw NumericalError("calibrated_ci: 1 + b <= 0, the estimate is not monotone in the true effect");

    const RootProblem problem{model, log_estimate, se * se};
    double half_width = 10.0 * std::sqrt(se * se + model.c + std::abs(model.d) * 10.0);
    // With d < 0 the sampling variance is positive only for |theta0| below
    // this limit; the bracket is kept inside it.
    const double limit = model.d < 0.0 ? (model.c + se * se) / -model.d * (1.0 - 1e-12)
                                       : std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < 3; ++attempt, half_width *= 2.0) {
        const double lo = std::max(log_estimate - half_width, -limit);
        const double hi = std::min(log_estimate + half_width, limit);
        if (!(lo < hi)) break;
        const double lower = bisect(problem, 0.5 + 0.5 * level, lo, hi);
        const double upper = bisect(problem, 0.5 - 0.5 * level, lo, hi);
        if (std::isfinite(lower) && std::isfinite(upper)) return {lower, upper, "calibrated", "frequentist", 0};
    }
    throw NumericalError("calibrated_ci: no sign change within the search bracket (model extrapolation failure)");
}

}  // namespace empcal
