#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "empcal/error.hpp"
#include "empcal/synthesis.hpp"
#include "support.hpp"

using namespace empcal;

namespace {

SyntheticCohort cohort_with_total(long long total, std::uint64_t seed, std::vector<double> coefficients = {0.5, -0.5}) {
    CohortSpec spec;
    spec.entries = 1000;
    spec.covariates = 10;
    spec.coefficients = std::move(coefficients);
    spec.total_outcomes = total;
    spec.seed = seed;
    return simulate_cohort(spec);
}

// Gradient of the mean Poisson negative log-likelihood, computed directly.
std::vector<double> nll_gradient(const SyntheticCohort& cohort, const std::vector<double>& beta) {
    std::vector<double> g(beta.size(), 0.0);
    for (const auto& e : cohort.entries) {
        double eta = beta[0];
        for (std::size_t j = 0; j < e.covariates.size(); ++j) eta += beta[j + 1] * e.covariates[j];
        const double r = e.duration_days * std::exp(eta) - e.outcome_count;
        g[0] += r;
        for (std::size_t j = 0; j < e.covariates.size(); ++j) g[j + 1] += r * e.covariates[j];
    }
    for (auto& v : g) v /= static_cast<double>(cohort.entries.size());
    return g;
}

}  // namespace

TEST_CASE("simulate_cohort allocates an exact outcome total") {
    const auto cohort = cohort_with_total(200, 1);
    CHECK(cohort.entries.size() == 1000);
    CHECK(cohort.total_outcomes() == 200);
    CHECK(cohort.covariate_width() == 10);
    CHECK_NOTHROW(cohort.validate());
}

TEST_CASE("cohort files round-trip") {
    const auto cohort = cohort_with_total(50, 2);
    testing::TempDir dir;
    write_cohort(dir / "c.csv", cohort, "# header");
    const auto back = load_cohort(dir / "c.csv");
    REQUIRE(back.entries.size() == cohort.entries.size());
    for (std::size_t i = 0; i < cohort.entries.size(); ++i) {
        CHECK(back.entries[i].duration_days == cohort.entries[i].duration_days);
        CHECK(back.entries[i].outcome_count == cohort.entries[i].outcome_count);
        CHECK(back.entries[i].covariates == cohort.entries[i].covariates);
    }
    testing::spit(dir / "bad.csv", "duration_days,outcome_count,z1\n0,1,1\n");
    CHECK_THROWS_AS(load_cohort(dir / "bad.csv"), ValidationError);
    CHECK_THROWS_AS(load_cohort(dir / "missing.csv"), IoError);
}

TEST_CASE("constant rates give the null Poisson model") {
    SyntheticCohort cohort;
    for (int i = 0; i < 300; ++i) cohort.entries.push_back({100 + i % 50, i % 3, {1.0}});
    const auto model = fit_poisson_l1(cohort, 10);
    const double expected = std::log(static_cast<double>(cohort.total_outcomes()) / cohort.total_days());
    CHECK(model.coefficients[0] == doctest::Approx(expected).epsilon(1e-5));
    CHECK(model.coefficients[1] == 0.0);
}

TEST_CASE("a penalty at or above the maximum zeroes every slope") {
    const auto cohort = cohort_with_total(300, 3, {1.0, -1.0, 0.5});
    const double top = poisson_penalty_max(cohort);
    const auto flat = fit_poisson_fixed(cohort, 1.0001 * top);
    for (std::size_t j = 1; j < flat.coefficients.size(); ++j) CHECK(flat.coefficients[j] == 0.0);
    const auto huge = fit_poisson_fixed(cohort, 1e6);
    for (std::size_t j = 1; j < huge.coefficients.size(); ++j) CHECK(huge.coefficients[j] == 0.0);
    const auto active = fit_poisson_fixed(cohort, 0.5 * top);
    int nonzero = 0;
    for (std::size_t j = 1; j < active.coefficients.size(); ++j) nonzero += active.coefficients[j] != 0.0;
    CHECK(nonzero >= 1);
}

TEST_CASE("fitted coefficients satisfy the lasso optimality conditions") {
    const auto cohort = cohort_with_total(400, 4, {0.8, -0.6});
    const double penalty = 0.05 * poisson_penalty_max(cohort);
    const auto model = fit_poisson_fixed(cohort, penalty);
    const auto g = nll_gradient(cohort, model.coefficients);
    CHECK(std::abs(g[0]) <= 1e-5);
    for (std::size_t j = 1; j < g.size(); ++j) {
        const double b = model.coefficients[j];
        if (b == 0.0)
            CHECK(std::abs(g[j]) <= penalty + 1e-5);
        else
            CHECK(g[j] + penalty * (b > 0 ? 1.0 : -1.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-5));
    }
}

TEST_CASE("training deviance does not increase as the penalty falls") {
    const auto cohort = cohort_with_total(400, 5, {0.8, -0.6, 0.4});
    const double top = poisson_penalty_max(cohort);
    double previous = INFINITY;
    std::vector<double> warm;
    for (int k = 0; k < 15; ++k) {
        const double penalty = top * std::pow(1e-3, k / 14.0);
        const auto model = fit_poisson_fixed(cohort, penalty, {}, warm.empty() ? nullptr : &warm);
        warm = model.coefficients;
        const double dev = poisson_deviance(cohort, model);
        CHECK(dev <= previous + 1e-8);
        previous = dev;
    }
}

TEST_CASE("cross-validation keeps the true sparse support") {
    int recovered = 0;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
        CohortSpec spec;
        spec.entries = 2000;
        spec.covariates = 50;
        spec.base_rate_per_day = 2e-3;
        spec.coefficients = {0.9, -0.9, 0.7};
        spec.seed = 700 + rep;
        const auto cohort = simulate_cohort(spec);
        const auto model = fit_poisson_l1(cohort, 10);
        CHECK(model.penalty_grid.size() == 20);
        CHECK(model.cv_deviance.size() == 20);
        if (model.coefficients[1] > 0 && model.coefficients[2] < 0 && model.coefficients[3] > 0) ++recovered;
    }
    CHECK(recovered >= 16);
}

TEST_CASE("all-zero outcomes give an intercept-only model with a notice") {
    SyntheticCohort cohort;
    for (int i = 0; i < 20; ++i) cohort.entries.push_back({30, 0, {static_cast<double>(i % 2)}});
    const auto model = fit_poisson_l1(cohort, 10);
    REQUIRE_FALSE(model.notices.empty());
    CHECK(model.coefficients[1] == 0.0);
    CHECK(std::isfinite(model.coefficients[0]));
    CHECK(model.predicted_rate(cohort.entries[0]) > 0.0);
}

TEST_CASE("injection adds outcomes and stops within epsilon") {
    const auto cohort = cohort_with_total(200, 6);
    const auto model = fit_poisson_l1(cohort, 10);
    for (double theta : {1.5, 2.0, 4.0}) {
        const auto r = inject(cohort, model, theta, 0.01, 42);
        CHECK(std::abs(r.achieved_ratio - theta) <= 0.01);
        CHECK(r.target_theta == theta);
        CHECK(r.iterations >= 1);
        long long total = 0;
        for (std::size_t i = 0; i < r.modified_counts.size(); ++i) {
            CHECK(r.modified_counts[i] >= cohort.entries[i].outcome_count);
            total += r.modified_counts[i];
        }
        CHECK(static_cast<double>(total) / 200.0 == r.achieved_ratio);
    }
}

TEST_CASE("injection guards") {
    const auto small = cohort_with_total(24, 7);
    const auto model = fit_poisson_l1(cohort_with_total(200, 7), 10);
    CHECK_THROWS_AS(inject(small, model, 2.0), ValidationError);
    const auto cohort = cohort_with_total(200, 7);
    CHECK_THROWS_AS(inject(cohort, model, 1.0), UsageError);
    CHECK_THROWS_AS(inject(cohort, model, 0.5), UsageError);
    CHECK_THROWS_AS(inject(cohort, model, 2.0, 0.0), UsageError);
    CHECK_THROWS_AS(inject(cohort, model, 2.0, 1e-9, 1, 3), NumericalError);
}

TEST_CASE("unconditioned injection ratios average to theta") {
    const auto cohort = cohort_with_total(200, 8);
    const auto model = fit_poisson_l1(cohort, 10);
    double sum = 0.0;
    const int seeds = 400;
    for (int s = 0; s < seeds; ++s) sum += inject(cohort, model, 2.0, 100.0, s).achieved_ratio;
    // Each ratio has sd about sqrt(200) / 200 = 0.07.
    CHECK(std::abs(sum / seeds - 2.0) <= 4.0 * 0.0707 / std::sqrt(seeds));
}

TEST_CASE("injection is reproducible per seed") {
    const auto cohort = cohort_with_total(200, 9);
    const auto model = fit_poisson_l1(cohort, 10);
    const auto a = inject(cohort, model, 2.0, 0.01, 5);
    const auto b = inject(cohort, model, 2.0, 0.01, 5);
    CHECK(a.modified_counts == b.modified_counts);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("control universe layout and linkage") {
    SimulationSpec spec;
    spec.families = 12;
    spec.seed = 3;
    const auto set = simulate_control_universe(spec);
    REQUIRE(set.size() == 48);
    CHECK(set.negative_count() == 12);
    CHECK(set.records[0].outcome_id == "NC01");
    CHECK(set.records[1].outcome_id == "NC01-rr1.5");
    for (const auto& r : set.records) {
        CHECK(r.family_id.substr(0, 2) == "NC");
        CHECK(r.outcome_id.rfind(r.family_id, 0) == 0);
        CHECK(r.se_log_estimate >= spec.se_min);
        CHECK(r.se_log_estimate <= spec.se_max);
    }
    CHECK_NOTHROW(validate_controls(set));
    CHECK_THROWS_AS(simulate_control_universe(SimulationSpec{.families = 1}), UsageError);
}

TEST_CASE("no bias and vanishing noise reproduce the true effects") {
    SimulationSpec spec;
    spec.families = 10;
    spec.se_min = spec.se_max = 1e-12;
    for (const auto& r : simulate_control_universe(spec).records)
        CHECK(std::abs(r.log_estimate - std::log(*r.true_effect_size)) < 1e-10);
}

TEST_CASE("simulated bias has the requested mean") {
    SimulationSpec spec;
    spec.families = 500;
    spec.bias_mean = 0.2;
    spec.bias_sd = 0.05;
    spec.seed = 10;
    const auto set = simulate_control_universe(spec);
    double sum = 0.0;
    for (const auto& r : set.records) sum += r.estimated_bias();
    CHECK(std::abs(sum / set.size() - 0.2) <= 0.01);
}

TEST_CASE("universe generation is deterministic per seed") {
    SimulationSpec spec;
    spec.families = 30;
    spec.bias_sd = 0.1;
    spec.seed = 5;
    testing::TempDir dir;
    write_controls(dir / "a.csv", simulate_control_universe(spec), "#");
    write_controls(dir / "b.csv", simulate_control_universe(spec), "#");
    CHECK(testing::slurp(dir / "a.csv") == testing::slurp(dir / "b.csv"));
    spec.seed = 6;
    write_controls(dir / "c.csv", simulate_control_universe(spec), "#");
    CHECK(testing::slurp(dir / "a.csv") != testing::slurp(dir / "c.csv"));
}
