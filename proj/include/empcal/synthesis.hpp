#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "empcal/control_data.hpp"

namespace empcal {

struct CohortEntry {
    int duration_days = 1;
    int outcome_count = 0;
    std::vector<double> covariates;
};

struct SyntheticCohort {
    std::vector<CohortEntry> entries;

    std::size_t covariate_width() const { return entries.empty() ? 0 : entries.front().covariates.size(); }
    long long total_outcomes() const;
    long long total_days() const;
    // Positive durations, non-negative counts, one covariate width.
    void validate() const;
};

// Cohort CSV: "duration_days,outcome_count,z1,...,zk".
SyntheticCohort load_cohort(const std::filesystem::path& path);
void write_cohort(const std::filesystem::path& path, const SyntheticCohort& cohort, const std::string& header_comment);

// Poisson regression with a log-duration offset: E[y_i] = d_i * exp(b0 + z_i . b).
struct PoissonModel {
    std::vector<double> coefficients;  // intercept first
    double l1_penalty = 0.0;
    std::vector<double> penalty_grid;  // cross-validated grid, largest first
    std::vector<double> cv_deviance;   // mean held-out deviance per grid point
    std::vector<std::string> notices;

    double linear_predictor(const CohortEntry& entry) const;
    double predicted_rate(const CohortEntry& entry) const;   // per day
    double predicted_count(const CohortEntry& entry) const;  // rate * duration
};

struct PoissonFitOptions {
    std::size_t grid_size = 20;
    double grid_ratio = 1e-3;    // smallest penalty / largest penalty
    double tolerance = 1e-6;     // KKT gradient tolerance
    int max_sweeps = 10000;
};

// Objective: mean Poisson negative log-likelihood + penalty * sum |b_j|
// (intercept unpenalized), minimized by cyclic coordinate descent.
PoissonModel fit_poisson_fixed(const SyntheticCohort& cohort, double penalty, const PoissonFitOptions& options = {},
                               const std::vector<double>* warm_start = nullptr);

// Smallest penalty at which every non-intercept coefficient is zero.
double poisson_penalty_max(const SyntheticCohort& cohort);

// Penalty chosen on a geometric grid by k-fold cross-validated deviance
// (fold = entry index mod folds), then refit on the whole cohort.
PoissonModel fit_poisson_l1(const SyntheticCohort& cohort, int folds = 10, const PoissonFitOptions& options = {});

double poisson_deviance(const SyntheticCohort& cohort, const PoissonModel& model);

struct InjectionResult {
    std::vector<int> modified_counts;
    double achieved_ratio = 0.0;
    double target_theta = 0.0;
    int iterations = 0;
    std::uint64_t seed = 0;
};

inline constexpr long long kMinimumInjectionOutcomes = 25;

// Adds Poisson((theta - 1) * predicted count) outcomes to every entry,
// redrawing from the original counts until the rate ratio of modified to
// original cohort is within epsilon of theta.
InjectionResult inject(const SyntheticCohort& cohort, const PoissonModel& model, double theta, double epsilon = 0.01,
                       std::uint64_t seed = 0, int max_iter = 10000);

struct CohortSpec {
    std::size_t entries = 1000;
    std::size_t covariates = 10;
    double prevalence = 0.3;
    double base_rate_per_day = 1e-3;
    std::vector<double> coefficients;  // true effects of the leading covariates
    int min_duration = 30;
    int max_duration = 365;
    // When set, exactly this many outcomes are allocated multinomially in
    // proportion to the entries' expected counts.
    std::optional<long long> total_outcomes;
    std::uint64_t seed = 0;
};

SyntheticCohort simulate_cohort(const CohortSpec& spec);

struct SimulationSpec {
    std::size_t families = 100;
    double bias_mean = 0.0;
    double bias_sd = 0.0;
    double bias_slope = 0.0;  // bias mean changes by this per unit log true effect
    double se_min = 0.05;
    double se_max = 0.3;      // standard errors are log-uniform on [se_min, se_max]
    std::vector<double> positive_effects{1.5, 2.0, 4.0};
    std::string database_id = "SIM";
    std::uint64_t seed = 0;
};

// One negative control per family plus one positive per entry of
// positive_effects, each estimate log(theta) + bias + se * noise.
ControlSet simulate_control_universe(const SimulationSpec& spec);

}  // namespace empcal
