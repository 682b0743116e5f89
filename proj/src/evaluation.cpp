#include "empcal/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "empcal/empirical_null.hpp"
#include "empcal/error.hpp"
#include "empcal/systematic_error.hpp"
#include "empcal/text_io.hpp"

namespace empcal {

std::string to_string(TrainingDesign design) { return design == TrainingDesign::NegPos ? "neg_pos" : "neg_only"; }

std::string to_string(CalibrationModel model) {
    switch (model) {
        case CalibrationModel::Constant:
            return "constant";
        case CalibrationModel::Linear:
            return "linear";
        case CalibrationModel::Frequentist:
            break;
    }
    return "frequentist";
}

TrainingDesign parse_training_design(const std::string& name) {
    if (name == "neg_pos" || name == "neg_pos_train") return TrainingDesign::NegPos;
    if (name == "neg_only" || name == "neg_only_train") return TrainingDesign::NegOnly;
    throw UsageError("unknown training design '" + name + "' (expected neg_pos or neg_only)");
}

CalibrationModel parse_calibration_model(const std::string& name) {
    if (name == "constant") return CalibrationModel::Constant;
    if (name == "linear") return CalibrationModel::Linear;
    if (name == "frequentist") return CalibrationModel::Frequentist;
    throw UsageError("unknown model '" + name + "' (expected constant, linear or frequentist)");
}

std::size_t CoverageReport::total_tested() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.tested;
    return n;
}

const CoverageGroup& CoverageReport::at(double effect_size) const {
    for (const auto& g : groups)
        if (g.effect_size == effect_size) return g;
    throw UsageError("no coverage group for effect size " + format_double(effect_size));
}

CoverageReport coverage(std::span<const IntervalOutcome> outcomes) {
    if (outcomes.empty()) throw ValidationError("coverage: no intervals");
    std::map<double, CoverageGroup> groups;
    for (const auto& o : outcomes) {
        if (!(o.true_effect_size > 0.0)) throw ValidationError("coverage: true effect size must be > 0");
        auto& g = groups[o.true_effect_size];
        g.effect_size = o.true_effect_size;
        ++g.tested;
        if (o.interval.contains(std::log(o.true_effect_size))) ++g.covered;
    }
    CoverageReport report;
    for (auto& [theta, g] : groups) {
        g.coverage = static_cast<double>(g.covered) / static_cast<double>(g.tested);
        report.groups.push_back(g);
    }
    report.method = outcomes.front().interval.method;
    report.model = outcomes.front().interval.model;
    return report;
}

double rmse(std::span<const double> coverages, double nominal) {
    if (coverages.empty()) throw ValidationError("rmse: no coverage groups");
    double ss = 0.0;
    for (double c : coverages) ss += (c - nominal) * (c - nominal);
    return std::sqrt(ss / static_cast<double>(coverages.size()));
}

double rmse(const CoverageReport& report, double nominal) {
    std::vector<double> values;
    for (const auto& g : report.groups) values.push_back(g.coverage);
    return rmse(values, nominal);
}

namespace {

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (fold + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Calibrates the test side of one split; returns (universe index, row) pairs.
std::vector<std::pair<std::size_t, ScatterRow>> run_split(const ControlSet& universe, const SplitPlan& plan,
                                                          TrainingDesign design, CalibrationModel model,
                                                          McmcConfig config, std::uint64_t mcmc_seed,
                                                          const ProtocolOptions& options,
                                                          std::vector<std::string>& warnings) {
    ControlSet train = filter_controls(select_families(universe, plan.train_families));
    if (design == TrainingDesign::NegOnly) train = filter_negative_only(train);

    std::function<CalibratedInterval(double, double)> calibrate;
    PosteriorSamples posterior;
    SystematicErrorModel systematic;
    if (model == CalibrationModel::Frequentist) {
        if (design == TrainingDesign::NegPos) {
            systematic = fit_systematic(train);
        } else {
            const auto null = fit_null(train);
            systematic.a = null.nu;
            systematic.c = null.sigma2;
        }
        calibrate = [&](double est, double se) { return calibrated_ci(systematic, est, se, options.level); };
    } else {
        config.seed = mcmc_seed;
        posterior = fit_bias_model(model == CalibrationModel::Constant ? BiasModel::Constant : BiasModel::Linear,
                                   train, config);
        warnings.insert(warnings.end(), posterior.warnings.begin(), posterior.warnings.end());
        calibrate = [&](double est, double se) {
            auto predictive = options.predictive;
            predictive.seed = mcmc_seed;
            return calibrate_posterior(posterior, est, se, options.level, predictive);
        };
    }

    std::vector<std::pair<std::size_t, ScatterRow>> rows;
    for (std::size_t i = 0; i < universe.records.size(); ++i) {
        const auto& r = universe.records[i];
        if (!r.is_control() || !plan.test_families.count(r.family_id)) continue;
        ScatterRow row;
        row.family_id = r.family_id;
        row.outcome_id = r.outcome_id;
        row.true_effect_size = *r.true_effect_size;
        row.log_estimate = r.log_estimate;
        row.se = r.se_log_estimate;
        row.calibrated = calibrate(r.log_estimate, r.se_log_estimate);
        row.calibrated.seed = mcmc_seed;
        row.uncalibrated = wald_interval(r.log_estimate, r.se_log_estimate, options.level);
        rows.emplace_back(i, std::move(row));
    }
    return rows;
}

}  // namespace

ProtocolResult run_protocol(const ControlSet& universe, TrainingDesign design, CalibrationModel model,
                            const McmcConfig& config, std::uint64_t seed, const ProtocolOptions& options) {
    if (model == CalibrationModel::Linear && design == TrainingDesign::NegOnly)
        throw UsageError(
            "run_protocol: the linear bias model needs positive controls to identify its slopes; only the constant "
            "model can be trained on negative controls alone");
    if (universe.empty()) throw ValidationError("run_protocol: empty universe");

    std::vector<SplitPlan> plans;
    if (options.folds >= 2)
        plans = rotate_by_family(universe, options.folds, seed);
    else
        plans.push_back(split_by_family(universe, options.fraction, seed));

    ProtocolResult result;
    result.seed = seed;
    result.database_id = universe.scope.database_id;
    std::vector<std::pair<std::size_t, ScatterRow>> rows;
    for (std::size_t k = 0; k < plans.size(); ++k) {
        auto part = run_split(universe, plans[k], design, model, config, fold_seed(seed, k), options, result.warnings);
        rows.insert(rows.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    if (rows.empty()) throw ValidationError("run_protocol: test split contains no controls");
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<IntervalOutcome> calibrated, uncalibrated;
    for (auto& [index, row] : rows) {
        calibrated.push_back({row.calibrated, row.true_effect_size});
        uncalibrated.push_back({row.uncalibrated, row.true_effect_size});
        result.rows.push_back(std::move(row));
    }
    result.calibrated = coverage(calibrated);
    result.uncalibrated = coverage(uncalibrated);
    for (auto* report : {&result.calibrated, &result.uncalibrated}) {
        report->model = to_string(model);
        report->training = to_string(design);
    }
    result.rmse_calibrated = rmse(result.calibrated);
    result.rmse_uncalibrated = rmse(result.uncalibrated);
    return result;
}

namespace {

std::ofstream open_artifact(const std::filesystem::path& path, const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    if (!header_comment.empty()) out << header_comment << '\n';
    return out;
}

// The provenance line goes in as an XML comment.
std::string svg_header(int width, int height, const std::string& header_comment) {
    std::string text = header_comment;
    if (text.rfind("# ", 0) == 0) text.erase(0, 2);
    return "<!-- " + text + " -->\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
}

std::string fixed(double v, int decimals = 3) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(decimals);
    s << v;
    return s.str();
}

void write_rmse_svg(const std::filesystem::path& path, std::span<const ProtocolResult> results,
                    const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    const int bar = 40, gap = 20, height = 300, base = 260;
    const int width = 60 + static_cast<int>(results.size()) * 2 * (bar + gap);
    out << svg_header(width, height, header_comment);
    out << "<line x1=\"40\" y1=\"" << base << "\" x2=\"" << width - 10 << "\" y2=\"" << base
        << "\" stroke=\"black\"/>\n";
    int x = 50;
    for (const auto& r : results) {
        for (auto [label, value, colour] : {std::tuple{"cal", r.rmse_calibrated, "#1f77b4"},
                                            std::tuple{"uncal", r.rmse_uncalibrated, "#d62728"}}) {
            const double h = std::min(1.0, value) * 220.0;
            out << "<rect x=\"" << x << "\" y=\"" << fixed(base - h, 1) << "\" width=\"" << bar << "\" height=\""
                << fixed(h, 1) << "\" fill=\"" << colour << "\"/>\n";
            out << "<text x=\"" << x << "\" y=\"" << base + 15 << "\">" << label << "</text>\n";
            out << "<text x=\"" << x << "\" y=\"" << fixed(base - h - 4, 1) << "\">" << fixed(value) << "</text>\n";
            x += bar + gap;
        }
    }
    out << "</svg>\n";
}

void write_scatter_svg(const std::filesystem::path& path, const std::vector<const ScatterRow*>& rows, double theta,
                       const CoverageGroup& cal, const CoverageGroup& uncal, const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    const int width = 420, height = 320;
    double max_se = 0.0, min_est = 0.0, max_est = 0.0;
    for (const auto* r : rows) {
        max_se = std::max(max_se, r->se);
        min_est = std::min(min_est, r->log_estimate);
        max_est = std::max(max_est, r->log_estimate);
    }
    max_se = max_se > 0.0 ? max_se : 1.0;
    const double span = max_est > min_est ? max_est - min_est : 1.0;
    out << svg_header(width, height, header_comment);
    out << "<text x=\"10\" y=\"16\">true effect " << format_double(theta) << ": calibrated " << fixed(cal.coverage)
        << ", uncalibrated " << fixed(uncal.coverage) << " (n=" << cal.tested << ")</text>\n";
    for (const auto* r : rows) {
        const double px = 40.0 + (r->log_estimate - min_est) / span * (width - 60);
        const double py = height - 30.0 - r->se / max_se * (height - 60);
        const bool covered = r->calibrated.contains(std::log(r->true_effect_size));
        out << "<circle cx=\"" << fixed(px, 1) << "\" cy=\"" << fixed(py, 1) << "\" r=\"2\" fill=\""
            << (covered ? "#1f77b4" : "#ff7f0e") << "\"/>\n";
    }
    out << "</svg>\n";
}

}  // namespace

void emit_figures(const std::filesystem::path& dir, std::span<const ProtocolResult> results,
                  const std::string& header_comment, bool svg) {
    if (results.empty()) throw ValidationError("emit_figures: no reports");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());

    {
        auto out = open_artifact(dir / "coverage.csv", header_comment);
        out << "database_id,method,model,training,effect_size,tested,covered,coverage\n";
        for (const auto& r : results)
            for (const auto* report : {&r.calibrated, &r.uncalibrated})
                for (const auto& g : report->groups)
                    out << r.database_id << ',' << report->method << ',' << report->model << ',' << report->training
                        << ',' << format_double(g.effect_size) << ',' << g.tested << ',' << g.covered << ','
                        << format_double(g.coverage) << '\n';
    }
    {
        auto out = open_artifact(dir / "rmse.csv", header_comment);
        out << "database_id,method,model,training,rmse\n";
        for (const auto& r : results) {
            out << r.database_id << ",calibrated," << r.calibrated.model << ',' << r.calibrated.training << ','
                << format_double(r.rmse_calibrated) << '\n';
            out << r.database_id << ",uncalibrated," << r.uncalibrated.model << ',' << r.uncalibrated.training << ','
                << format_double(r.rmse_uncalibrated) << '\n';
        }
    }

    std::map<double, std::vector<const ScatterRow*>> by_theta;
    for (const auto& r : results)
        for (const auto& row : r.rows) by_theta[row.true_effect_size].push_back(&row);
    for (const auto& [theta, rows] : by_theta) {
        auto out = open_artifact(dir / ("scatter_" + format_double(theta) + ".csv"), header_comment);
        out << "family_id,outcome_id,log_estimate,se,cal_lower,cal_upper,covered_calibrated,covered_uncalibrated\n";
        for (const auto* row : rows)
            out << row->family_id << ',' << row->outcome_id << ',' << format_double(row->log_estimate) << ','
                << format_double(row->se) << ',' << format_double(row->calibrated.lower) << ','
                << format_double(row->calibrated.upper) << ','
                << (row->calibrated.contains(std::log(theta)) ? 1 : 0) << ','
                << (row->uncalibrated.contains(std::log(theta)) ? 1 : 0) << '\n';
    }

    if (svg) {
        const auto fig_dir = dir / "figures";
        std::filesystem::create_directories(fig_dir, ec);
        if (ec) throw IoError("cannot create " + fig_dir.string());
        write_rmse_svg(fig_dir / "rmse.svg", results, header_comment);
        const auto& first = results.front();
        for (const auto& [theta, rows] : by_theta)
            write_scatter_svg(fig_dir / ("scatter_" + format_double(theta) + ".svg"), rows, theta,
                              first.calibrated.at(theta), first.uncalibrated.at(theta), header_comment);
    }
}

}  // namespace empcal
