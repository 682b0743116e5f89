#include "empcal/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "empcal/error.hpp"
#include "empcal/text_io.hpp"

namespace empcal {

long long SyntheticCohort::total_outcomes() const {
    long long total = 0;
    for (const auto& e : entries) total += e.outcome_count;
    return total;
}

long long SyntheticCohort::total_days() const {
    long long total = 0;
    for (const auto& e : entries) total += e.duration_days;
    return total;
}

void SyntheticCohort::validate() const {
    const auto width = covariate_width();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const auto where = "cohort entry " + std::to_string(i + 1);
        if (e.duration_days <= 0) throw ValidationError(where + ": duration must be > 0");
        if (e.outcome_count < 0) throw ValidationError(where + ": outcome count must be >= 0");
        if (e.covariates.size() != width) throw ValidationError(where + ": covariate width differs");
        for (double z : e.covariates)
            if (!std::isfinite(z)) throw ValidationError(where + ": covariate not finite");
    }
}

SyntheticCohort load_cohort(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open cohort file: " + path.string());
    SyntheticCohort cohort;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split_csv_line(line);
        if (!have_header) {
            if (fields.size() < 2 || fields[0] != "duration_days" || fields[1] != "outcome_count")
                throw ValidationError(path.string() + ": header must start with 'duration_days,outcome_count'");
            width = fields.size() - 2;
            have_header = true;
            continue;
        }
        const auto where = path.string() + ": row " + std::to_string(line_no);
        if (fields.size() != width + 2) throw ValidationError(where + ": wrong column count");
        CohortEntry entry;
        try {
            entry.duration_days = static_cast<int>(parse_u64(fields[0]));
            entry.outcome_count = static_cast<int>(parse_u64(fields[1]));
            for (std::size_t j = 0; j < width; ++j) entry.covariates.push_back(parse_double(fields[j + 2]));
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
        cohort.entries.push_back(std::move(entry));
    }
    if (!have_header) throw ValidationError(path.string() + ": missing header row");
    cohort.validate();
    return cohort;
}

void write_cohort(const std::filesystem::path& path, const SyntheticCohort& cohort, const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    if (!header_comment.empty()) out << header_comment << '\n';
    out << "duration_days,outcome_count";
    for (std::size_t j = 0; j < cohort.covariate_width(); ++j) out << ",z" << j + 1;
    out << '\n';
    for (const auto& e : cohort.entries) {
        out << e.duration_days << ',' << e.outcome_count;
        for (double z : e.covariates) out << ',' << format_double(z);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

double PoissonModel::linear_predictor(const CohortEntry& entry) const {
    double eta = coefficients.at(0);
    for (std::size_t j = 0; j < entry.covariates.size(); ++j) eta += coefficients.at(j + 1) * entry.covariates[j];
    return eta;
}

double PoissonModel::predicted_rate(const CohortEntry& entry) const { return std::exp(linear_predictor(entry)); }

double PoissonModel::predicted_count(const CohortEntry& entry) const {
    return predicted_rate(entry) * entry.duration_days;
}

namespace {

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

// Coordinate descent over the subset `rows`; one exact-Hessian Newton step
// per coordinate with step halving until the penalized objective does not
// increase.
class PoissonSolver {
public:
    PoissonSolver(const SyntheticCohort& cohort, std::vector<std::size_t> rows)
        : cohort_(cohort), rows_(std::move(rows)), p_(cohort.covariate_width()), columns_(p_ + 1) {
        // Column-major nonzeros over local row positions; column 0 is the intercept.
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            const auto& e = cohort_.entries[rows_[r]];
            columns_[0].push_back({r, 1.0});
            for (std::size_t j = 0; j < p_; ++j)
                if (e.covariates[j] != 0.0) columns_[j + 1].push_back({r, e.covariates[j]});
        }
    }

    double max_gradient_at_zero(double intercept) const {
        std::vector<double> beta(p_ + 1, 0.0);
        beta[0] = intercept;
        const auto g = gradient(means(beta));
        double m = 0.0;
        for (std::size_t j = 1; j <= p_; ++j) m = std::max(m, std::abs(g[j]));
        return m;
    }

    // Returns true on convergence. Fitted means are held as scale * mu[r] so
    // the exact intercept update after each covariate step costs O(1).
    bool solve(std::vector<double>& beta, double penalty, const PoissonFitOptions& options) const {
        const double n = static_cast<double>(rows_.size());
        double y_total = 0.0;
        for (std::size_t r = 0; r < rows_.size(); ++r) y_total += count(r);
        auto mu = means(beta);
        for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
            double scale = 1.0;
            double mu_total = std::accumulate(mu.begin(), mu.end(), 0.0);
            for (std::size_t j = 0; j <= p_; ++j) {
                const auto& column = columns_[j];
                double g = 0.0, h = 0.0;
                for (const auto& [r, x] : column) {
                    g += x * (scale * mu[r] - count(r));
                    h += x * x * scale * mu[r];
                }
                g /= n;
                h /= n;
                if (!(h > 0.0)) {
                    // Covariate is zero on every row; its coefficient is unidentified.
                    beta[j] = j > 0 ? 0.0 : beta[j];
                    continue;
                }
                const double old = beta[j];
                const double target = j == 0 ? old - g / h : soft_threshold(h * old - g, penalty) / h;
                if (target == old) continue;
                // Step halving on the exact change of the coordinate objective.
                const double pen_before = j == 0 ? 0.0 : penalty * std::abs(old);
                double delta = target - old;
                for (int k = 0; k < 40; ++k) {
                    double change = 0.0;
                    for (const auto& [r, x] : column)
                        change += scale * mu[r] * std::expm1(delta * x) - count(r) * delta * x;
                    change /= n;
                    if (j > 0) change += penalty * std::abs(old + delta) - pen_before;
                    if (change <= 1e-15) break;
                    delta *= 0.5;
                }
                beta[j] = old + delta;
                if (j > 0 && std::abs(beta[j]) < 1e-14) {
                    delta -= beta[j];
                    beta[j] = 0.0;
                }
                for (const auto& [r, x] : column) {
                    const double moved = mu[r] * std::exp(delta * x);
                    mu_total += scale * (moved - mu[r]);
                    mu[r] = moved;
                }
                if (j > 0 && y_total > 0.0 && delta != 0.0) {
                    const double factor = y_total / mu_total;
                    beta[0] += std::log(factor);
                    scale *= factor;
                    mu_total = y_total;
                }
            }
            mu = means(beta);
            if (kkt_violation(beta, gradient(mu), penalty) < options.tolerance) return true;
        }
        return false;
    }

private:
    struct Entry {
        std::size_t row;
        double x;
    };

    double count(std::size_t r) const { return cohort_.entries[rows_[r]].outcome_count; }

    std::vector<double> means(const std::vector<double>& beta) const {
        std::vector<double> mu(rows_.size());
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            const auto& e = cohort_.entries[rows_[r]];
            double eta = beta[0];
            for (std::size_t j = 0; j < p_; ++j) eta += beta[j + 1] * e.covariates[j];
            mu[r] = e.duration_days * std::exp(eta);
        }
        return mu;
    }

    std::vector<double> gradient(const std::vector<double>& mu) const {
        std::vector<double> g(p_ + 1, 0.0);
        for (std::size_t j = 0; j <= p_; ++j) {
            for (const auto& [r, x] : columns_[j]) g[j] += x * (mu[r] - count(r));
            g[j] /= static_cast<double>(rows_.size());
        }
        return g;
    }

    double kkt_violation(const std::vector<double>& beta, const std::vector<double>& g, double penalty) const {
        double worst = std::abs(g[0]);
        for (std::size_t j = 1; j <= p_; ++j) {
            const double v = beta[j] != 0.0 ? std::abs(g[j] + penalty * (beta[j] > 0 ? 1.0 : -1.0))
                                             : std::max(0.0, std::abs(g[j]) - penalty);
            worst = std::max(worst, v);
        }
        return worst;
    }

    const SyntheticCohort& cohort_;
    std::vector<std::size_t> rows_;
    std::size_t p_;
    std::vector<std::vector<Entry>> columns_;
};

std::vector<std::size_t> all_rows(const SyntheticCohort& cohort) {
    std::vector<std::size_t> rows(cohort.entries.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return rows;
}

double null_intercept(const SyntheticCohort& cohort, const std::vector<std::size_t>& rows) {
    double y = 0.0, d = 0.0;
    for (std::size_t i : rows) {
        y += cohort.entries[i].outcome_count;
        d += cohort.entries[i].duration_days;
    }
    return std::log(std::max(y, 0.5) / d);
}

double deviance_term(double y, double mu) {
    return 2.0 * ((y > 0.0 ? y * std::log(y / mu) : 0.0) - (y - mu));
}

}  // namespace

double poisson_penalty_max(const SyntheticCohort& cohort) {
    const auto rows = all_rows(cohort);
    return PoissonSolver(cohort, rows).max_gradient_at_zero(null_intercept(cohort, rows));
}

PoissonModel fit_poisson_fixed(const SyntheticCohort& cohort, double penalty, const PoissonFitOptions& options,
                               const std::vector<double>* warm_start) {
    cohort.validate();
    if (cohort.entries.empty()) throw ValidationError("fit_poisson: empty cohort");
    if (!(penalty >= 0.0)) throw UsageError("fit_poisson: penalty must be >= 0");
    PoissonModel model;
    model.l1_penalty = penalty;
    const auto rows = all_rows(cohort);
    if (cohort.total_outcomes() == 0) {
        model.coefficients.assign(cohort.covariate_width() + 1, 0.0);
        model.coefficients[0] = null_intercept(cohort, rows);
        model.notices.push_back("all outcomes are zero: intercept-only model with a 0.5-event continuity correction");
        return model;
    }
    std::vector<double> beta(cohort.covariate_width() + 1, 0.0);
    if (warm_start && warm_start->size() == beta.size())
        beta = *warm_start;
    else
        beta[0] = null_intercept(cohort, rows);
    if (!PoissonSolver(cohort, rows).solve(beta, penalty, options))
        throw NumericalError("fit_poisson: coordinate descent did not converge within " +
                             std::to_string(options.max_sweeps) + " sweeps");
    model.coefficients = std::move(beta);
    return model;
}

PoissonModel fit_poisson_l1(const SyntheticCohort& cohort, int folds, const PoissonFitOptions& options) {
    cohort.validate();
    if (folds < 2) throw UsageError("fit_poisson_l1: folds must be >= 2");
    if (cohort.entries.size() < static_cast<std::size_t>(folds))
        throw ValidationError("fit_poisson_l1: fewer entries than folds");
    if (cohort.total_outcomes() == 0) return fit_poisson_fixed(cohort, 0.0, options);

    const double top = poisson_penalty_max(cohort);
    std::vector<double> grid;
    if (top > 0.0) {
        for (std::size_t k = 0; k < options.grid_size; ++k)
            grid.push_back(top * std::pow(options.grid_ratio, static_cast<double>(k) /
                                                                  static_cast<double>(options.grid_size - 1)));
    } else {
        grid.push_back(0.0);
    }

    std::vector<double> cv(grid.size(), 0.0);
    const std::size_t n = cohort.entries.size();
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < n; ++i) (static_cast<int>(i % folds) == f ? test : train).push_back(i);
        PoissonSolver solver(cohort, train);
        std::vector<double> beta(cohort.covariate_width() + 1, 0.0);
        beta[0] = null_intercept(cohort, train);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            if (!solver.solve(beta, grid[k], options))
                throw NumericalError("fit_poisson_l1: coordinate descent did not converge in fold " +
                                     std::to_string(f + 1));
            double dev = 0.0;
            for (std::size_t i : test) {
                const auto& e = cohort.entries[i];
                double eta = beta[0];
                for (std::size_t j = 0; j < e.covariates.size(); ++j) eta += beta[j + 1] * e.covariates[j];
                dev += deviance_term(e.outcome_count, e.duration_days * std::exp(eta));
            }
            cv[k] += dev / static_cast<double>(folds);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(cv.begin(), cv.end()) - cv.begin());

    // Refit along the path down to the chosen penalty.
    std::vector<double> beta;
    PoissonModel model;
    for (std::size_t k = 0; k <= best; ++k) {
        model = fit_poisson_fixed(cohort, grid[k], options, beta.empty() ? nullptr : &beta);
        beta = model.coefficients;
    }
    model.penalty_grid = grid;
    model.cv_deviance = cv;
    return model;
}

double poisson_deviance(const SyntheticCohort& cohort, const PoissonModel& model) {
    double dev = 0.0;
    for (const auto& e : cohort.entries) dev += deviance_term(e.outcome_count, model.predicted_count(e));
    return dev;
}

InjectionResult inject(const SyntheticCohort& cohort, const PoissonModel& model, double theta, double epsilon,
                       std::uint64_t seed, int max_iter) {
    if (!(theta > 1.0)) throw UsageError("inject: theta must be > 1 (theta = 1 leaves the cohort unchanged)");
    if (!(epsilon > 0.0)) throw UsageError("inject: epsilon must be > 0");
    if (max_iter < 1) throw UsageError("inject: max_iter must be >= 1");
    const long long original = cohort.total_outcomes();
    if (original < kMinimumInjectionOutcomes)
        throw ValidationError("inject: cohort has " + std::to_string(original) + " outcomes; at least " +
                              std::to_string(kMinimumInjectionOutcomes) + " are required");

    std::vector<double> means;
    means.reserve(cohort.entries.size());
    for (const auto& e : cohort.entries) {
        const double lambda = model.predicted_count(e);
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw NumericalError("inject: predicted count not finite and positive");
        means.push_back((theta - 1.0) * lambda);
    }

    // Durations are unchanged, so the rate ratio reduces to a count ratio.
    std::mt19937_64 rng(seed);
    InjectionResult result;
    result.target_theta = theta;
    result.seed = seed;
    double closest = std::numeric_limits<double>::infinity();
    std::vector<int> counts(cohort.entries.size());
    for (int attempt = 1; attempt <= max_iter; ++attempt) {
        long long total = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            std::poisson_distribution<int> added(means[i]);
            counts[i] = cohort.entries[i].outcome_count + added(rng);
            total += counts[i];
        }
        const double ratio = static_cast<double>(total) / static_cast<double>(original);
        if (std::abs(ratio - theta) < std::abs(closest - theta)) closest = ratio;
        if (std::abs(ratio - theta) <= epsilon) {
            result.modified_counts = counts;
            result.achieved_ratio = ratio;
            result.iterations = attempt;
            return result;
        }
    }
    throw NumericalError("inject: no attempt within epsilon after " + std::to_string(max_iter) +
                         " iterations; closest ratio " + format_double(closest));
}

SyntheticCohort simulate_cohort(const CohortSpec& spec) {
    if (spec.entries == 0) throw UsageError("simulate_cohort: entries must be > 0");
    if (spec.min_duration < 1 || spec.max_duration < spec.min_duration)
        throw UsageError("simulate_cohort: invalid duration range");
    std::mt19937_64 rng(spec.seed);
    std::bernoulli_distribution covariate(spec.prevalence);
    std::uniform_int_distribution<int> duration(spec.min_duration, spec.max_duration);

    SyntheticCohort cohort;
    std::vector<double> expected;
    for (std::size_t i = 0; i < spec.entries; ++i) {
        CohortEntry e;
        e.duration_days = duration(rng);
        double eta = std::log(spec.base_rate_per_day);
        for (std::size_t j = 0; j < spec.covariates; ++j) {
            e.covariates.push_back(covariate(rng) ? 1.0 : 0.0);
            if (j < spec.coefficients.size()) eta += spec.coefficients[j] * e.covariates.back();
        }
        expected.push_back(e.duration_days * std::exp(eta));
        cohort.entries.push_back(std::move(e));
    }
    if (spec.total_outcomes) {
        std::discrete_distribution<std::size_t> pick(expected.begin(), expected.end());
        for (long long k = 0; k < *spec.total_outcomes; ++k) ++cohort.entries[pick(rng)].outcome_count;
    } else {
        for (std::size_t i = 0; i < spec.entries; ++i) {
            std::poisson_distribution<int> count(expected[i]);
            cohort.entries[i].outcome_count = count(rng);
        }
    }
    return cohort;
}

ControlSet simulate_control_universe(const SimulationSpec& spec) {
    if (spec.families < 2) throw UsageError("simulate: at least 2 families are required");
    if (!(spec.se_min > 0.0) || spec.se_max < spec.se_min) throw UsageError("simulate: need 0 < se_min <= se_max");
    if (!(spec.bias_sd >= 0.0)) throw UsageError("simulate: bias_sd must be >= 0");
    for (double theta : spec.positive_effects)
        if (!(theta > 0.0)) throw UsageError("simulate: positive control effects must be > 0");

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(std::log(spec.se_min), std::log(spec.se_max));

    ControlSet set;
    set.scope = {spec.database_id, "simulated"};
    const int digits = static_cast<int>(std::to_string(spec.families).size());
    for (std::size_t f = 0; f < spec.families; ++f) {
        std::string id = std::to_string(f + 1);
        id = "NC" + std::string(static_cast<std::size_t>(digits) - id.size(), '0') + id;
        std::vector<double> effects{1.0};
        effects.insert(effects.end(), spec.positive_effects.begin(), spec.positive_effects.end());
        for (double theta : effects) {
            ControlRecord r;
            r.database_id = spec.database_id;
            r.target_id = "T1";
            r.comparator_id = "C1";
            r.outcome_id = theta == 1.0 ? id : id + "-rr" + format_double(theta);
            r.family_id = id;
            r.true_effect_size = theta;
            const double log_theta = std::log(theta);
            const double se = spec.se_min == spec.se_max ? spec.se_min : std::exp(unif(rng));
            const double bias = spec.bias_mean + spec.bias_slope * log_theta + spec.bias_sd * std_normal(rng);
            r.log_estimate = log_theta + bias + se * std_normal(rng);
            r.se_log_estimate = se;
            set.records.push_back(std::move(r));
        }
    }
    return set;
}

}  // namespace empcal
