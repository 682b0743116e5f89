#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "empcal/empirical_null.hpp"
#include "empcal/error.hpp"
#include "empcal/normal.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace empcal;
using namespace testing::oracles;

TEST_CASE("fit_null recovers the generating null and matches the grid oracle") {
    std::vector<double> est, se;
    simulate_negatives(1000, 0.25, 0.05, 0.1, 2024, est, se);
    const auto fit = fit_null(est, se);
    CHECK(std::abs(fit.nu - 0.25) <= 0.01);
    CHECK(std::abs(std::sqrt(fit.sigma2) - 0.05) <= 0.02);
    const auto grid = grid_search(est, se, 0.0, 0.5, 0.05);
    CHECK(std::abs(fit.log_likelihood - grid.ll) <= 1e-4);
    CHECK(fit.log_likelihood >= grid.ll - 1e-9);
    CHECK(fit.log_likelihood == doctest::Approx(oracle_ll(est, se, fit.nu, fit.sigma2)).epsilon(1e-12));
    CHECK(fit.n_controls == 1000);
}

TEST_CASE("fit_null with heterogeneous standard errors matches the grid oracle") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.05, 0.4);
    std::vector<double> est, se;
    for (int i = 0; i < 150; ++i) {
        se.push_back(u(rng));
        est.push_back(-0.1 + 0.15 * z(rng) + se.back() * z(rng));
    }
    const auto fit = fit_null(est, se);
    const auto grid = grid_search(est, se, -0.6, 0.4, 0.2);
    CHECK(std::abs(fit.log_likelihood - grid.ll) <= 1e-4);
    CHECK(std::abs(fit.nu - grid.nu) < 1e-3);
}

TEST_CASE("degenerate and symmetric fixtures") {
    SUBCASE("all estimates zero gives the boundary optimum") {
        const auto fit = fit_null(std::vector<double>{0, 0, 0, 0}, std::vector<double>{0.1, 0.2, 0.3, 0.1});
        CHECK(fit.nu == 0.0);
        CHECK(fit.sigma2 == 0.0);
    }
    SUBCASE("two symmetric controls give nu = 0") {
        const auto fit = fit_null(std::vector<double>{-0.4, 0.4}, std::vector<double>{0.1, 0.1});
        CHECK(std::abs(fit.nu) < 1e-8);
        CHECK(fit.sigma2 > 0.0);
    }
    SUBCASE("homogeneous controls land on the boundary") {
        const auto fit = fit_null(std::vector<double>{0.1, 0.11, 0.09, 0.1}, std::vector<double>{0.2, 0.2, 0.2, 0.2});
        CHECK(fit.sigma2 == 0.0);
        CHECK(fit.nu == doctest::Approx(0.1));
    }
}

TEST_CASE("fit_null input guards") {
    CHECK_THROWS_AS(fit_null(std::vector<double>{0.1}, std::vector<double>{0.1}), ValidationError);
    CHECK_THROWS_AS(fit_null(std::vector<double>{0.1, 0.2}, std::vector<double>{0.1}), UsageError);
    ControlSet mixed = testing::negatives({0.1, 0.2}, {0.1, 0.1});
    mixed.records.push_back(testing::record("F0", 2.0, 0.7, 0.1));
    CHECK_THROWS_AS(fit_null(mixed), ValidationError);
}

TEST_CASE("closed-form marginal equals numerical integration over the bias") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.01, 0.5);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 20; ++rep) {
        const double nu = 0.3 * z(rng), sigma2 = u(rng) * u(rng), tau = u(rng), x = nu + z(rng) * 0.4;
        auto integrand = [&](double beta) {
            const double a = std::exp(-0.5 * (x - beta) * (x - beta) / (tau * tau)) / (tau * std::sqrt(2 * M_PI));
            const double b =
                std::exp(-0.5 * (beta - nu) * (beta - nu) / sigma2) / std::sqrt(2 * M_PI * sigma2);
            return a * b;
        };
        const double lo = std::min(x, nu) - 12.0 * std::sqrt(sigma2 + tau * tau);
        const double hi = std::max(x, nu) + 12.0 * std::sqrt(sigma2 + tau * tau);
        const double numeric =
            boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, lo, hi, 15, 1e-13);
        const double closed = std::exp(null_log_likelihood(std::vector<double>{x}, std::vector<double>{tau}, nu, sigma2));
        CHECK(closed == doctest::Approx(numeric).epsilon(1e-8));
    }
}

TEST_CASE("calibrated_p examples") {
    const double se = 0.37;
    CHECK(calibrated_p({}, 1.959963984540054 * se, se) == doctest::Approx(0.05).epsilon(1e-12));

    NullDistribution null;
    null.nu = 0.1;
    null.sigma2 = 0.04;
    const double oracle = 2.0 * testing::hp_normal_cdf(-0.4 / std::sqrt(0.08));
    CHECK(calibrated_p(null, 0.5, 0.2) == doctest::Approx(oracle).epsilon(1e-13));
    CHECK(calibrated_p(null, 0.1, 0.2) == 1.0);

    // One-sided variants split the two-sided value.
    const double two = calibrated_p(null, 0.5, 0.2);
    CHECK(calibrated_p(null, 0.5, 0.2, Sidedness::Greater) == doctest::Approx(two / 2));
    CHECK(calibrated_p(null, 0.5, 0.2, Sidedness::Less) == doctest::Approx(1 - two / 2));
    CHECK_THROWS_AS(calibrated_p(null, 0.5, 0.0), ValidationError);
}

TEST_CASE("a (0, 0) null gives the Wald p-value exactly") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    for (int i = 0; i < 100; ++i) {
        const double est = z(rng), se = 0.05 + std::abs(z(rng));
        const double wald = std::min(1.0, 2.0 * normal_cdf(-std::abs(est) / se));
        CHECK(calibrated_p({}, est, se) == wald);
    }
}
