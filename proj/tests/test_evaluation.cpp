#include <doctest.h>

#include <cmath>
#include <limits>

#include "empcal/error.hpp"
#include "empcal/evaluation.hpp"
#include "empcal/synthesis.hpp"
#include "support.hpp"

using namespace empcal;

namespace {

IntervalOutcome outcome(double lower, double upper, double theta) {
    return {CalibratedInterval{lower, upper, "calibrated", "constant", 0}, theta};
}

McmcConfig quick_config() {
    McmcConfig config;
    config.burn_in = 300;
    config.samples = 300;
    return config;
}

ControlSet universe(double bias_mean, double bias_sd, std::size_t families, std::uint64_t seed, double se_min = 0.05,
                    double se_max = 0.3) {
    SimulationSpec spec;
    spec.families = families;
    spec.bias_mean = bias_mean;
    spec.bias_sd = bias_sd;
    spec.se_min = se_min;
    spec.se_max = se_max;
    spec.seed = seed;
    return simulate_control_universe(spec);
}

}  // namespace

TEST_CASE("unbounded intervals cover everything") {
    const double big = std::numeric_limits<double>::max();
    std::vector<IntervalOutcome> v;
    for (double theta : {1.0, 1.5, 2.0, 4.0}) v.push_back(outcome(-big, big, theta));
    const auto report = coverage(v);
    REQUIRE(report.groups.size() == 4);
    for (const auto& g : report.groups) CHECK(g.coverage == 1.0);
    CHECK(report.total_tested() == 4);
}

TEST_CASE("945 of 1000 covering intervals give 0.945") {
    std::vector<IntervalOutcome> v;
    for (int i = 0; i < 1000; ++i) v.push_back(i < 945 ? outcome(-1, 1, 1.0) : outcome(0.5, 1, 1.0));
    CHECK(coverage(v).at(1.0).coverage == 0.945);
    CHECK(coverage(v).at(1.0).tested == 1000);
}

TEST_CASE("endpoints count as covering") {
    const double t = std::log(2.0);
    std::vector<IntervalOutcome> v{outcome(t, t + 1, 2.0), outcome(t - 1, t, 2.0)};
    CHECK(coverage(v).at(2.0).coverage == 1.0);
    CHECK_THROWS_AS(coverage(std::vector<IntervalOutcome>{}), ValidationError);
    CHECK_THROWS_AS(coverage(v).at(4.0), UsageError);
}

TEST_CASE("rmse arithmetic") {
    CHECK(std::abs(rmse(std::vector<double>{0.90, 0.95, 0.95, 0.95}, 0.95) - 0.025) <= 1e-12);
    CHECK(rmse(std::vector<double>{0.95, 0.95, 0.95, 0.95}) == 0.0);
    CHECK(rmse(std::vector<double>{0.95, 0.96}) > 0.0);
    CHECK(rmse(std::vector<double>{1.0}, 0.95) == doctest::Approx(0.05));
    CHECK_THROWS_AS(rmse(std::vector<double>{}), ValidationError);
}

TEST_CASE("parsing of design and model names") {
    CHECK(parse_training_design("neg_only_train") == TrainingDesign::NegOnly);
    CHECK(parse_training_design("neg_pos") == TrainingDesign::NegPos);
    CHECK(parse_calibration_model("frequentist") == CalibrationModel::Frequentist);
    CHECK_THROWS_AS(parse_training_design("all"), UsageError);
    CHECK_THROWS_AS(parse_calibration_model("spline"), UsageError);
}

TEST_CASE("linear model with negative-only training is rejected") {
    CHECK_THROWS_AS(run_protocol(universe(0.1, 0.1, 20, 1), TrainingDesign::NegOnly, CalibrationModel::Linear,
                                 quick_config(), 1),
                    UsageError);
}

TEST_CASE("an unbiased universe with small errors is covered either way") {
    // Every family is tested once, so each group has 1000 intervals and the
    // binomial sd of a 0.95 coverage is about 0.007.
    const auto u = universe(0.0, 0.0, 1000, 3, 0.01, 0.02);
    ProtocolOptions options;
    options.folds = 5;
    for (auto model : {CalibrationModel::Constant, CalibrationModel::Frequentist}) {
        const auto r = run_protocol(u, TrainingDesign::NegPos, model, quick_config(), 7, options);
        REQUIRE(r.calibrated.total_tested() == 4000);
        for (const auto& g : r.calibrated.groups) CHECK(g.coverage >= 0.93);
        for (const auto& g : r.uncalibrated.groups) CHECK(g.coverage >= 0.93);
    }
}

TEST_CASE("calibration restores coverage on a biased universe") {
    ProtocolOptions options;
    options.folds = 5;
    const auto r = run_protocol(universe(0.2, 0.05, 150, 4), TrainingDesign::NegPos, CalibrationModel::Constant,
                                quick_config(), 11, options);
    CHECK(r.uncalibrated.at(1.0).coverage < 0.85);
    CHECK(r.rmse_calibrated < r.rmse_uncalibrated);
    CHECK(r.calibrated.total_tested() == 600);
    CHECK(r.rows.size() == 600);
}

TEST_CASE("frequentist and negative-only protocols run") {
    const auto u = universe(0.2, 0.05, 100, 5);
    const auto a = run_protocol(u, TrainingDesign::NegOnly, CalibrationModel::Frequentist, quick_config(), 2);
    CHECK(a.calibrated.training == "neg_only");
    CHECK(a.calibrated.model == "frequentist");
    CHECK(a.uncalibrated.method == "uncalibrated");
    const auto b = run_protocol(u, TrainingDesign::NegOnly, CalibrationModel::Constant, quick_config(), 2);
    CHECK(b.calibrated.at(1.0).coverage > b.uncalibrated.at(1.0).coverage);
    const auto c = run_protocol(u, TrainingDesign::NegPos, CalibrationModel::Linear, quick_config(), 2);
    CHECK(c.calibrated.model == "linear");
    // A single 80/20 split tests 20 of 100 families.
    CHECK(c.rows.size() == 80);
}

TEST_CASE("widening every interval never lowers coverage") {
    const auto r = run_protocol(universe(0.2, 0.05, 60, 6), TrainingDesign::NegPos, CalibrationModel::Frequentist,
                                quick_config(), 3);
    std::vector<IntervalOutcome> wider;
    for (const auto& row : r.rows) {
        auto ci = row.uncalibrated;
        ci.lower -= 0.1;
        ci.upper += 0.1;
        wider.push_back({ci, row.true_effect_size});
    }
    const auto widened = coverage(wider);
    for (const auto& g : r.uncalibrated.groups) CHECK(widened.at(g.effect_size).coverage >= g.coverage);
}

TEST_CASE("protocol is reproducible and figures are byte-identical") {
    const auto u = universe(0.2, 0.05, 60, 8);
    const auto a = run_protocol(u, TrainingDesign::NegPos, CalibrationModel::Constant, quick_config(), 21);
    const auto b = run_protocol(u, TrainingDesign::NegPos, CalibrationModel::Constant, quick_config(), 21);
    testing::TempDir dir;
    const ProtocolResult ra[] = {a};
    const ProtocolResult rb[] = {b};
    emit_figures(dir / "a", ra, "# empcal test seed=21", true);
    emit_figures(dir / "b", rb, "# empcal test seed=21", true);
    for (const char* f : {"coverage.csv", "rmse.csv", "scatter_1.csv", "scatter_1.5.csv", "scatter_2.csv",
                          "scatter_4.csv", "figures/rmse.svg", "figures/scatter_4.svg"}) {
        const auto text = testing::slurp(dir / "a" / f);
        CHECK(!text.empty());
        CHECK(text == testing::slurp(dir / "b" / f));
        CHECK(text.find("empcal test seed=21") != std::string::npos);
    }
    // One RMSE record per (method, database); scatter rows equal the tested count.
    const auto rmse_text = testing::slurp(dir / "a" / "rmse.csv");
    CHECK(std::count(rmse_text.begin(), rmse_text.end(), '\n') == 4);
    const auto scatter = testing::slurp(dir / "a" / "scatter_2.csv");
    CHECK(static_cast<std::size_t>(std::count(scatter.begin(), scatter.end(), '\n')) ==
          2 + a.calibrated.at(2.0).tested);
}

TEST_CASE("emit_figures reports unusable directories") {
    testing::TempDir dir;
    testing::spit(dir / "file", "x");
    const auto r = run_protocol(universe(0.0, 0.0, 20, 9), TrainingDesign::NegPos, CalibrationModel::Frequentist,
                                quick_config(), 1);
    const ProtocolResult rs[] = {r};
    CHECK_THROWS_AS(emit_figures(dir / "file", rs, "#"), IoError);
    CHECK_THROWS_AS(emit_figures(dir / "x", std::span<const ProtocolResult>{}, "#"), ValidationError);
}
