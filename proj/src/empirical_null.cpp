#include "empcal/empirical_null.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "empcal/error.hpp"
#include "empcal/normal.hpp"
#include "empcal/optimize.hpp"

namespace empcal {

double null_log_likelihood(std::span<const double> log_estimates, std::span<const double> standard_errors, double nu,
                           double sigma2) {
    double ll = 0.0;
    for (std::size_t i = 0; i < log_estimates.size(); ++i)
        ll += normal_logpdf(log_estimates[i], nu, sigma2 + standard_errors[i] * standard_errors[i]);
    return ll;
}

NullDistribution fit_null(const ControlSet& negatives) {
    std::vector<double> est, se;
    for (std::size_t i = 0; i < negatives.records.size(); ++i) {
        const auto& r = negatives.records[i];
        if (!r.is_negative_control())
            throw ValidationError("fit_null: record " + std::to_string(i + 1) + " (outcome '" + r.outcome_id +
                                  "') is not a negative control");
        est.push_back(r.log_estimate);
        se.push_back(r.se_log_estimate);
    }
    return fit_null(est, se);
}

NullDistribution fit_null(std::span<const double> log_estimates, std::span<const double> standard_errors) {
    const std::size_t n = log_estimates.size();
    if (n != standard_errors.size()) throw UsageError("fit_null: estimate and standard error counts differ");
    if (n < 2) throw ValidationError("fit_null: at least 2 negative controls are required");

    // Parameters: (nu, log sigma2).
    Objective objective = [&](const std::vector<double>& x, std::vector<double>& g) {
        const double nu = x[0];
        const double sigma2 = std::exp(x[1]);
        double value = 0.0;
        g.assign(2, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = sigma2 + standard_errors[i] * standard_errors[i];
            const double r = log_estimates[i] - nu;
            value -= normal_logpdf(log_estimates[i], nu, v);
            g[0] -= r / v;
            g[1] += 0.5 * (1.0 / v - r * r / (v * v)) * sigma2;
        }
        return value;
    };

    double weight_sum = 0.0, weighted = 0.0, mean = 0.0, mean_se2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 1.0 / (standard_errors[i] * standard_errors[i]);
        weight_sum += w;
        weighted += w * log_estimates[i];
        mean += log_estimates[i];
        mean_se2 += standard_errors[i] * standard_errors[i];
    }
    mean /= static_cast<double>(n);
    mean_se2 /= static_cast<double>(n);
    double pooled = 0.0;
    for (double e : log_estimates) pooled += (e - mean) * (e - mean);
    pooled /= static_cast<double>(n - 1);

    const double floor = 1e-4 * mean_se2;
    const double moments = std::max(pooled - mean_se2, floor);
    const std::vector<std::vector<double>> starts = {{mean, std::log(moments)},
                                                     {0.0, std::log(std::max(pooled, floor))}};

    NullDistribution best;
    best.n_controls = n;
    best.log_likelihood = -std::numeric_limits<double>::infinity();
    bool interior_converged = false;
    for (const auto& start : starts) {
        auto fit = minimize_bfgs(objective, start);
        if (!std::isfinite(fit.value)) continue;
        if (-fit.value > best.log_likelihood) {
            best.nu = fit.x[0];
            best.sigma2 = std::exp(fit.x[1]);
            best.log_likelihood = -fit.value;
            interior_converged = fit.converged;
        }
    }

    // Boundary candidate: sigma2 = 0 with the precision-weighted mean.
    const double nu_boundary = weighted / weight_sum;
    const double ll_boundary = null_log_likelihood(log_estimates, standard_errors, nu_boundary, 0.0);
    if (ll_boundary >= best.log_likelihood - 1e-10 || best.sigma2 < 1e-12 * mean_se2) {
        best.nu = nu_boundary;
        best.sigma2 = 0.0;
        best.log_likelihood = ll_boundary;
        return best;
    }
    if (!interior_converged) throw NumericalError("fit_null: optimizer did not converge within 500 iterations");
    return best;
}

double calibrated_p(const NullDistribution& null, double log_estimate, double se, Sidedness sides) {
    if (!(se > 0.0) || !std::isfinite(se)) throw ValidationError("calibrated_p: se must be positive and finite");
    // sqrt(se^2) can differ from se in the last bit; keep the Wald case exact.
    const double scale = null.sigma2 == 0.0 ? se : std::sqrt(null.sigma2 + se * se);
    const double z = (log_estimate - null.nu) / scale;
    switch (sides) {
        case Sidedness::Greater:
            return normal_sf(z);
        case Sidedness::Less:
            return normal_cdf(z);
        case Sidedness::TwoSided:
            break;
    }
    return std::min(1.0, 2.0 * normal_cdf(-std::abs(z)));
}

}  // namespace empcal
