#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <iostream>

#include "empcal/bayes_bias.hpp"
#include "empcal/cli.hpp"
#include "empcal/control_data.hpp"
#include "empcal/empirical_null.hpp"
#include "empcal/error.hpp"
#include "empcal/evaluation.hpp"
#include "empcal/synthesis.hpp"
#include "empcal/systematic_error.hpp"
#include "empcal/version.hpp"

namespace py = pybind11;
using namespace empcal;

namespace {

Sidedness parse_sides(const std::string& s) {
    if (s == "two") return Sidedness::TwoSided;
    if (s == "greater") return Sidedness::Greater;
    if (s == "less") return Sidedness::Less;
    throw UsageError("sides must be two, greater or less");
}

py::dict coverage_dict(const CoverageReport& report) {
    py::dict d;
    for (const auto& g : report.groups) d[py::float_(g.effect_size)] = g.coverage;
    return d;
}

}  // namespace

PYBIND11_MODULE(_empcal, m) {
    m.doc() = "Calibration of observational effect estimates using control outcomes";
    m.attr("__version__") = kVersion;

    auto base = py::register_exception<Error>(m, "EmpcalError", PyExc_RuntimeError);
    py::register_exception<UsageError>(m, "UsageError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    py::class_<ControlRecord>(m, "ControlRecord")
        .def(py::init<>())
        .def(py::init([](std::string database_id, std::string target_id, std::string comparator_id,
                         std::string outcome_id, std::string family_id, std::optional<double> true_effect_size,
                         double log_estimate, double se_log_estimate) {
                 return ControlRecord{database_id, target_id,          comparator_id, outcome_id,
                                      family_id,   true_effect_size,   log_estimate,  se_log_estimate};
             }),
             py::arg("database_id"), py::arg("target_id"), py::arg("comparator_id"), py::arg("outcome_id"),
             py::arg("family_id"), py::arg("true_effect_size"), py::arg("log_estimate"),
             py::arg("se_log_estimate"))
        .def_readwrite("database_id", &ControlRecord::database_id)
        .def_readwrite("target_id", &ControlRecord::target_id)
        .def_readwrite("comparator_id", &ControlRecord::comparator_id)
        .def_readwrite("outcome_id", &ControlRecord::outcome_id)
        .def_readwrite("family_id", &ControlRecord::family_id)
        .def_readwrite("true_effect_size", &ControlRecord::true_effect_size)
        .def_readwrite("log_estimate", &ControlRecord::log_estimate)
        .def_readwrite("se_log_estimate", &ControlRecord::se_log_estimate)
        .def("is_negative_control", &ControlRecord::is_negative_control);

    py::class_<ControlSet>(m, "ControlSet")
        .def(py::init<>())
        .def(py::init([](std::vector<ControlRecord> records) {
            ControlSet set;
            set.records = std::move(records);
            validate_controls(set);
            return set;
        }))
        .def_readwrite("records", &ControlSet::records)
        .def("__len__", &ControlSet::size)
        .def("negative_count", &ControlSet::negative_count)
        .def("families", &ControlSet::families)
        .def("negatives", &filter_negative_only);

    m.def("load_controls", [](const std::filesystem::path& p) { return load_controls(p); }, py::arg("path"));
    m.def("write_controls", py::overload_cast<const std::filesystem::path&, const ControlSet&, const std::string&>(
                                &write_controls),
          py::arg("path"), py::arg("controls"), py::arg("header") = std::string());

    py::class_<CalibratedInterval>(m, "CalibratedInterval")
        .def_readonly("lower", &CalibratedInterval::lower)
        .def_readonly("upper", &CalibratedInterval::upper)
        .def_readonly("method", &CalibratedInterval::method)
        .def_readonly("model", &CalibratedInterval::model)
        .def_readonly("seed", &CalibratedInterval::seed)
        .def("contains", &CalibratedInterval::contains)
        .def("__repr__", [](const CalibratedInterval& ci) {
            return "CalibratedInterval(" + std::to_string(ci.lower) + ", " + std::to_string(ci.upper) + ")";
        });
    m.def("wald_interval", &wald_interval, py::arg("log_estimate"), py::arg("se"), py::arg("level") = 0.95);

    py::class_<NullDistribution>(m, "NullDistribution")
        .def(py::init<>())
        .def_readwrite("nu", &NullDistribution::nu)
        .def_readwrite("sigma2", &NullDistribution::sigma2)
        .def_readonly("n_controls", &NullDistribution::n_controls)
        .def_readonly("log_likelihood", &NullDistribution::log_likelihood);
    m.def("fit_null",
          [](const std::vector<double>& est, const std::vector<double>& se) { return fit_null(est, se); },
          py::arg("log_estimates"), py::arg("standard_errors"));
    m.def("fit_null", py::overload_cast<const ControlSet&>(&fit_null), py::arg("negatives"));
    m.def("calibrated_p",
          [](const NullDistribution& null, double est, double se, const std::string& sides) {
              return calibrated_p(null, est, se, parse_sides(sides));
          },
          py::arg("null"), py::arg("log_estimate"), py::arg("se"), py::arg("sides") = "two");

    py::class_<SystematicErrorModel>(m, "SystematicErrorModel")
        .def(py::init<>())
        .def_readwrite("a", &SystematicErrorModel::a)
        .def_readwrite("b", &SystematicErrorModel::b)
        .def_readwrite("c", &SystematicErrorModel::c)
        .def_readwrite("d", &SystematicErrorModel::d)
        .def_readwrite("theta_abs_max", &SystematicErrorModel::theta_abs_max)
        .def_readonly("log_likelihood", &SystematicErrorModel::log_likelihood);
    m.def("fit_systematic", &fit_systematic, py::arg("controls"));
    m.def("calibrated_ci", &calibrated_ci, py::arg("model"), py::arg("log_estimate"), py::arg("se"),
          py::arg("level") = 0.95);

    py::class_<PosteriorSamples>(m, "PosteriorSamples")
        .def_property_readonly("model", [](const PosteriorSamples& s) { return to_string(s.model); })
        .def_readonly("warnings", &PosteriorSamples::warnings)
        .def("total_draws", &PosteriorSamples::total_draws)
        .def("parameter_names", &PosteriorSamples::parameter_names)
        .def("pooled", &PosteriorSamples::pooled);
    m.def("fit_bias_model",
          [](const ControlSet& train, const std::string& model, int chains, int burn_in, int samples,
             std::uint64_t seed) {
              McmcConfig config;
              config.chains = chains;
              config.burn_in = burn_in;
              config.samples = samples;
              config.seed = seed;
              py::gil_scoped_release release;
              return fit_bias_model(parse_bias_model(model), train, config);
          },
          py::arg("train"), py::arg("model") = "constant", py::arg("chains") = 3, py::arg("burn_in") = 1000,
          py::arg("samples") = 1000, py::arg("seed") = 0);
    m.def("calibrate_posterior",
          [](const PosteriorSamples& s, double est, double se, double level, std::uint64_t seed) {
              PredictiveOptions options;
              options.seed = seed;
              return calibrate_posterior(s, est, se, level, options);
          },
          py::arg("samples"), py::arg("log_estimate"), py::arg("se"), py::arg("level") = 0.95,
          py::arg("seed") = 0);

    m.def("simulate_control_universe",
          [](std::size_t families, double bias_mean, double bias_sd, double bias_slope, double se_min,
             double se_max, std::uint64_t seed) {
              SimulationSpec spec;
              spec.families = families;
              spec.bias_mean = bias_mean;
              spec.bias_sd = bias_sd;
              spec.bias_slope = bias_slope;
              spec.se_min = se_min;
              spec.se_max = se_max;
              spec.seed = seed;
              return simulate_control_universe(spec);
          },
          py::arg("families") = 100, py::arg("bias_mean") = 0.0, py::arg("bias_sd") = 0.0,
          py::arg("bias_slope") = 0.0, py::arg("se_min") = 0.05, py::arg("se_max") = 0.3, py::arg("seed") = 0);

    m.def("run_protocol",
          [](const ControlSet& universe, const std::string& design, const std::string& model, double fraction,
             std::size_t folds, int chains, int burn_in, int samples, std::uint64_t seed) {
              McmcConfig config;
              config.chains = chains;
              config.burn_in = burn_in;
              config.samples = samples;
              config.seed = seed;
              ProtocolOptions options;
              options.fraction = fraction;
              options.folds = folds;
              ProtocolResult r;
              {
                  py::gil_scoped_release release;
                  r = run_protocol(universe, parse_training_design(design), parse_calibration_model(model), config,
                                   seed, options);
              }
              py::dict out;
              out["calibrated"] = coverage_dict(r.calibrated);
              out["uncalibrated"] = coverage_dict(r.uncalibrated);
              out["rmse_calibrated"] = r.rmse_calibrated;
              out["rmse_uncalibrated"] = r.rmse_uncalibrated;
              out["warnings"] = r.warnings;
              return out;
          },
          py::arg("universe"), py::arg("design") = "neg_pos", py::arg("model") = "constant",
          py::arg("fraction") = 0.8, py::arg("folds") = 0, py::arg("chains") = 3, py::arg("burn_in") = 1000,
          py::arg("samples") = 1000, py::arg("seed") = 0);

    m.def("rmse", [](const std::vector<double>& coverages, double nominal) { return rmse(coverages, nominal); },
          py::arg("coverages"), py::arg("nominal") = 0.95);

    m.def("main",
          [](const std::vector<std::string>& args) {
              py::gil_scoped_release release;
              return dispatch(args, std::cout, std::cerr);
          },
          py::arg("args"), "Run the command-line tool with the given arguments; returns the exit status.");
}
