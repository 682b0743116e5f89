#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "empcal/bayes_bias.hpp"
#include "empcal/control_data.hpp"
#include "empcal/interval.hpp"

namespace empcal {

enum class TrainingDesign { NegPos, NegOnly };
enum class CalibrationModel { Constant, Linear, Frequentist };

std::string to_string(TrainingDesign design);
std::string to_string(CalibrationModel model);
TrainingDesign parse_training_design(const std::string& name);
CalibrationModel parse_calibration_model(const std::string& name);

struct CoverageGroup {
    double effect_size = 1.0;  // ratio scale
    std::size_t tested = 0;
    std::size_t covered = 0;
    double coverage = 0.0;
};

struct CoverageReport {
    std::vector<CoverageGroup> groups;  // ascending effect size
    std::string method;                 // calibrated | uncalibrated
    std::string model;                  // constant | linear | frequentist
    std::string training;               // neg_pos | neg_only

    std::size_t total_tested() const;
    const CoverageGroup& at(double effect_size) const;
};

struct IntervalOutcome {
    CalibratedInterval interval;
    double true_effect_size = 1.0;
};

// Groups by true effect size; an interval covers when lower <= log(theta) <= upper.
CoverageReport coverage(std::span<const IntervalOutcome> outcomes);

// sqrt(mean over groups of (coverage - nominal)^2); groups weigh equally.
double rmse(const CoverageReport& report, double nominal = 0.95);
double rmse(std::span<const double> coverages, double nominal = 0.95);

struct ProtocolOptions {
    double fraction = 0.8;
    // 0: one split at `fraction`. k >= 2: grouped k-fold rotation, so every
    // family is tested once by a model trained on the other folds.
    std::size_t folds = 0;
    double level = 0.95;
    PredictiveOptions predictive;
};

struct ScatterRow {
    std::string family_id;
    std::string outcome_id;
    double true_effect_size = 1.0;
    double log_estimate = 0.0;
    double se = 0.0;
    CalibratedInterval calibrated;
    CalibratedInterval uncalibrated;
};

struct ProtocolResult {
    CoverageReport calibrated;
    CoverageReport uncalibrated;
    double rmse_calibrated = 0.0;
    double rmse_uncalibrated = 0.0;
    std::vector<ScatterRow> rows;  // test records in universe order
    std::vector<std::string> warnings;
    std::string database_id;
    std::uint64_t seed = 0;
};

// Splits by family, fits on the training side (negatives only for NegOnly),
// and calibrates every test record. Uncalibrated intervals are Wald.
// The linear model cannot be trained on negative controls alone.
ProtocolResult run_protocol(const ControlSet& universe, TrainingDesign design, CalibrationModel model,
                            const McmcConfig& config, std::uint64_t seed, const ProtocolOptions& options = {});

// Writes coverage.csv, rmse.csv and scatter_<theta>.csv into dir, plus
// figures/*.svg when svg is set.
void emit_figures(const std::filesystem::path& dir, std::span<const ProtocolResult> results,
                  const std::string& header_comment, bool svg = false);

}  // namespace empcal
