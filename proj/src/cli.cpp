#include "empcal/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "empcal/bayes_bias.hpp"
#include "empcal/control_data.hpp"
#include "empcal/diagnostics.hpp"
#include "empcal/empirical_null.hpp"
#include "empcal/error.hpp"
#include "empcal/evaluation.hpp"
#include "empcal/synthesis.hpp"
#include "empcal/systematic_error.hpp"
#include "empcal/text_io.hpp"
#include "empcal/version.hpp"

namespace empcal {

namespace {

namespace fs = std::filesystem;

enum class LogLevel { Quiet, Info, Debug };

struct RunConfig {
    std::string subcommand;
    fs::path input;
    fs::path output;
    std::uint64_t seed = 0;
    std::string log_level = "info";
};

class Logger {
public:
    Logger(std::ostream& err, const std::string& level) : err_(err) {
        if (level == "quiet")
            level_ = LogLevel::Quiet;
        else if (level == "debug")
            level_ = LogLevel::Debug;
        else if (level != "info")
            throw UsageError("unknown log level '" + level + "'");
    }

    void info(const std::string& message) const {
        if (level_ != LogLevel::Quiet) err_ << "[empcal] " << message << '\n';
    }
    void debug(const std::string& message) const {
        if (level_ == LogLevel::Debug) err_ << "[empcal] " << message << '\n';
    }
    void warn(const std::string& message) const { err_ << "[empcal] warning: " << message << '\n'; }

private:
    std::ostream& err_;
    LogLevel level_ = LogLevel::Info;
};

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

// Writes the control CSV with extra columns computed per record.
template <class ExtraFn>
void write_with_columns(const fs::path& path, const std::string& header, const ControlSet& set,
                        const std::string& extra_header, ExtraFn&& extra) {
    auto out = open_output(path);
    out << header << '\n' << kControlCsvHeader << ',' << extra_header << '\n';
    for (const auto& r : set.records) {
        out << r.database_id << ',' << r.target_id << ',' << r.comparator_id << ',' << r.outcome_id << ','
            << r.family_id << ',' << (r.true_effect_size ? format_double(*r.true_effect_size) : std::string()) << ','
            << format_double(r.log_estimate) << ',' << format_double(r.se_log_estimate) << ',' << extra(r) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

KeyValues null_to_values(const NullDistribution& null) {
    return {{"model", "null"},
            {"nu", format_double(null.nu)},
            {"sigma2", format_double(null.sigma2)},
            {"n_controls", std::to_string(null.n_controls)},
            {"log_likelihood", format_double(null.log_likelihood)}};
}

NullDistribution null_from_values(const KeyValues& kv) {
    NullDistribution null;
    null.nu = require_double(kv, "nu");
    null.sigma2 = require_double(kv, "sigma2");
    if (!(null.sigma2 >= 0.0)) throw ValidationError("null file: sigma2 must be >= 0");
    return null;
}

KeyValues systematic_to_values(const SystematicErrorModel& m) {
    return {{"model", "systematic"},
            {"a", format_double(m.a)},
            {"b", format_double(m.b)},
            {"c", format_double(m.c)},
            {"d", format_double(m.d)},
            {"theta_abs_max", format_double(m.theta_abs_max)},
            {"n_controls", std::to_string(m.n_controls)},
            {"log_likelihood", format_double(m.log_likelihood)}};
}

SystematicErrorModel systematic_from_values(const KeyValues& kv) {
    SystematicErrorModel m;
    m.a = require_double(kv, "a");
    m.b = require_double(kv, "b");
    m.c = require_double(kv, "c");
    m.d = require_double(kv, "d");
    if (kv.count("theta_abs_max")) m.theta_abs_max = require_double(kv, "theta_abs_max");
    return m;
}

struct McmcFlags {
    McmcConfig config;
    std::string model = "constant";

    void attach(CLI::App* app) {
        app->add_option("--chains", config.chains, "Number of chains")->capture_default_str();
        app->add_option("--burn-in", config.burn_in, "Burn-in and adaptation iterations per chain")
            ->capture_default_str();
        app->add_option("--samples", config.samples, "Post burn-in iterations per chain")->capture_default_str();
        app->add_option("--thin", config.thinning, "Keep every n-th post burn-in draw")->capture_default_str();
        app->add_option("--precision-upper", config.priors.precision_upper,
                        "Upper bound of the Uniform prior on 1/sigma^2")
            ->capture_default_str();
    }
};

void add_seed(CLI::App* app, RunConfig& run) {
    app->add_option("--seed", run.seed, "Random seed (default from EMPCAL_SEED, else 0)")
        ->envname("EMPCAL_SEED")
        ->capture_default_str();
}

void write_draws_warning_log(const Logger& log, const PosteriorSamples& samples) {
    for (const auto& w : samples.warnings) log.warn(w);
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Empirical and Bayesian calibration of observational effect estimates", "empcal"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", std::string(kVersion));
    app.set_config("--config", "", "Optional TOML/INI config file; command-line flags override it");

    RunConfig run;
    app.add_option("--log-level", run.log_level, "quiet, info or debug")->capture_default_str();

    // fit-null
    auto* fit_null_cmd = app.add_subcommand("fit-null", "Fit the empirical null distribution from negative controls");
    fit_null_cmd->add_option("-i,--input", run.input, "Control CSV")->required();
    fit_null_cmd->add_option("-o,--output", run.output, "Output key/value file")->required();
    add_seed(fit_null_cmd, run);

    // calibrate-pvalue
    fs::path null_path;
    std::string sides = "two";
    auto* cal_p_cmd = app.add_subcommand("calibrate-pvalue", "Calibrated p-values against a fitted null");
    cal_p_cmd->add_option("--null", null_path, "Null distribution file from fit-null")->required();
    cal_p_cmd->add_option("-i,--input", run.input, "Estimates CSV")->required();
    cal_p_cmd->add_option("-o,--output", run.output, "Output CSV with p,cal_p appended")->required();
    cal_p_cmd->add_option("--sides", sides, "two, greater or less")
        ->check(CLI::IsMember({"two", "greater", "less"}))
        ->capture_default_str();
    add_seed(cal_p_cmd, run);

    // fit-systematic
    auto* fit_sys_cmd = app.add_subcommand("fit-systematic", "Fit the systematic error model on all controls");
    fit_sys_cmd->add_option("-i,--input", run.input, "Control CSV")->required();
    fit_sys_cmd->add_option("-o,--output", run.output, "Output key/value file")->required();
    add_seed(fit_sys_cmd, run);

    // calibrate-ci
    fs::path model_path;
    double level = 0.95;
    auto* cal_ci_cmd = app.add_subcommand("calibrate-ci", "Calibrated confidence intervals");
    cal_ci_cmd->add_option("--model", model_path, "Systematic error model from fit-systematic")->required();
    cal_ci_cmd->add_option("-i,--input", run.input, "Estimates CSV")->required();
    cal_ci_cmd->add_option("-o,--output", run.output, "Output CSV with cal_lower,cal_upper appended")->required();
    cal_ci_cmd->add_option("--level", level, "Confidence level")->capture_default_str();
    add_seed(cal_ci_cmd, run);

    // bayes-fit
    McmcFlags mcmc;
    bool negatives_only = false;
    auto* bayes_fit_cmd = app.add_subcommand("bayes-fit", "Sample the posterior of a Bayesian bias model");
    bayes_fit_cmd->add_option("-i,--input", run.input, "Training control CSV")->required();
    bayes_fit_cmd->add_option("-o,--output", run.output, "Draws CSV")->required();
    bayes_fit_cmd->add_option("--model", mcmc.model, "constant or linear")
        ->check(CLI::IsMember({"constant", "linear"}))
        ->capture_default_str();
    bayes_fit_cmd->add_flag("--negatives-only", negatives_only, "Train on negative controls only");
    mcmc.attach(bayes_fit_cmd);
    add_seed(bayes_fit_cmd, run);

    // bayes-calibrate
    fs::path draws_path;
    std::string mode = "mixture";
    int metropolis_steps = 5;
    auto* bayes_cal_cmd = app.add_subcommand("bayes-calibrate", "Posterior intervals for estimates of interest");
    bayes_cal_cmd->add_option("--draws", draws_path, "Draws CSV from bayes-fit")->required();
    bayes_cal_cmd->add_option("-i,--input", run.input, "Estimates CSV")->required();
    bayes_cal_cmd->add_option("-o,--output", run.output, "Output CSV with cal_lower,cal_upper appended")->required();
    bayes_cal_cmd->add_option("--level", level, "Interval level")->capture_default_str();
    bayes_cal_cmd->add_option("--mode", mode, "mixture or sampled (constant model)")
        ->check(CLI::IsMember({"mixture", "sampled"}))
        ->capture_default_str();
    bayes_cal_cmd->add_option("--metropolis-steps", metropolis_steps, "Linear model: theta0 updates per draw")
        ->capture_default_str();
    add_seed(bayes_cal_cmd, run);

    // inject
    double theta = 2.0, epsilon = 0.01;
    int max_iter = 10000, folds = 10;
    auto* inject_cmd = app.add_subcommand("inject", "Inject outcomes into a cohort to reach a target rate ratio");
    inject_cmd->add_option("-i,--input", run.input, "Cohort CSV (duration_days,outcome_count,z1..zk)")->required();
    inject_cmd->add_option("-o,--output", run.output, "Modified cohort CSV")->required();
    inject_cmd->add_option("--theta", theta, "Target rate ratio (> 1)")->capture_default_str();
    inject_cmd->add_option("--epsilon", epsilon, "Tolerance on the achieved ratio")->capture_default_str();
    inject_cmd->add_option("--max-iter", max_iter, "Maximum resampling attempts")->capture_default_str();
    inject_cmd->add_option("--folds", folds, "Cross-validation folds for the outcome model")->capture_default_str();
    add_seed(inject_cmd, run);

    // simulate-cohort
    CohortSpec cohort_spec;
    auto* sim_cohort_cmd = app.add_subcommand("simulate-cohort", "Generate a synthetic cohort for inject");
    sim_cohort_cmd->add_option("-o,--output", run.output, "Cohort CSV")->required();
    sim_cohort_cmd->add_option("--entries", cohort_spec.entries)->capture_default_str();
    sim_cohort_cmd->add_option("--covariates", cohort_spec.covariates)->capture_default_str();
    sim_cohort_cmd->add_option("--prevalence", cohort_spec.prevalence)->capture_default_str();
    sim_cohort_cmd->add_option("--base-rate", cohort_spec.base_rate_per_day, "Outcomes per day")
        ->capture_default_str();
    sim_cohort_cmd->add_option("--coefficients", cohort_spec.coefficients, "True effects of the leading covariates");
    sim_cohort_cmd->add_option("--total-outcomes", cohort_spec.total_outcomes, "Allocate exactly this many outcomes");
    add_seed(sim_cohort_cmd, run);

    // simulate
    SimulationSpec sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic universe of negative and positive controls");
    sim_cmd->add_option("-o,--output", run.output, "Control CSV")->required();
    sim_cmd->add_option("--families", sim.families)->capture_default_str();
    sim_cmd->add_option("--bias-mean", sim.bias_mean)->capture_default_str();
    sim_cmd->add_option("--bias-sd", sim.bias_sd)->capture_default_str();
    sim_cmd->add_option("--bias-slope", sim.bias_slope)->capture_default_str();
    sim_cmd->add_option("--se-min", sim.se_min)->capture_default_str();
    sim_cmd->add_option("--se-max", sim.se_max)->capture_default_str();
    sim_cmd->add_option("--database", sim.database_id)->capture_default_str();
    add_seed(sim_cmd, run);

    // evaluate
    std::string design = "neg_pos", eval_model = "constant";
    ProtocolOptions protocol;
    fs::path out_dir;
    bool svg = false;
    McmcFlags eval_mcmc;
    auto* eval_cmd = app.add_subcommand("evaluate", "Run the coverage protocol on a control universe");
    eval_cmd->add_option("-i,--input", run.input, "Control CSV")->required();
    eval_cmd->add_option("--design", design, "neg_pos or neg_only")
        ->check(CLI::IsMember({"neg_pos", "neg_only", "neg_pos_train", "neg_only_train"}))
        ->capture_default_str();
    eval_cmd->add_option("--model", eval_model, "constant, linear or frequentist")
        ->check(CLI::IsMember({"constant", "linear", "frequentist"}))
        ->capture_default_str();
    auto* fraction_opt = eval_cmd->add_option("--fraction", protocol.fraction, "Training fraction of families")
                             ->capture_default_str();
    eval_cmd->add_option("--folds", protocol.folds, "Rotate a grouped k-fold split instead of one split")
        ->excludes(fraction_opt);
    eval_cmd->add_option("--level", protocol.level, "Interval level")->capture_default_str();
    eval_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
    eval_cmd->add_flag("--svg", svg, "Also render figures/*.svg");
    eval_mcmc.attach(eval_cmd);
    add_seed(eval_cmd, run);

    // diagnostics
    auto* diag_cmd = app.add_subcommand("diagnostics", "Convergence diagnostics and plot data for a draws file");
    diag_cmd->add_option("--draws", draws_path, "Draws CSV from bayes-fit")->required();
    diag_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
    add_seed(diag_cmd, run);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << app.help();
        return kExitUsage;
    }

    try {
        const Logger log(err, run.log_level);
        run.subcommand = app.get_subcommands().front()->get_name();
        const std::string header = provenance_line(run.subcommand, run.seed);
        log.debug(header);

        if (*fit_null_cmd) {
            const auto set = load_controls(run.input);
            const auto null = fit_null(filter_negative_only(set));
            write_key_values(run.output, null_to_values(null), header);
            log.info("nu=" + format_double(null.nu) + " sigma2=" + format_double(null.sigma2));
        } else if (*cal_p_cmd) {
            const auto null = null_from_values(read_key_values(null_path));
            const auto set = load_controls(run.input);
            const Sidedness s = sides == "greater" ? Sidedness::Greater
                                : sides == "less"  ? Sidedness::Less
                                                   : Sidedness::TwoSided;
            write_with_columns(run.output, header, set, "p,cal_p", [&](const ControlRecord& r) {
                return format_double(calibrated_p({}, r.log_estimate, r.se_log_estimate, s)) + "," +
                       format_double(calibrated_p(null, r.log_estimate, r.se_log_estimate, s));
            });
        } else if (*fit_sys_cmd) {
            const auto set = filter_controls(load_controls(run.input));
            const auto model = fit_systematic(set);
            write_key_values(run.output, systematic_to_values(model), header);
            log.info("a=" + format_double(model.a) + " b=" + format_double(model.b) + " c=" + format_double(model.c) +
                     " d=" + format_double(model.d));
        } else if (*cal_ci_cmd) {
            const auto model = systematic_from_values(read_key_values(model_path));
            const auto set = load_controls(run.input);
            write_with_columns(run.output, header, set, "cal_lower,cal_upper", [&](const ControlRecord& r) {
                const auto ci = calibrated_ci(model, r.log_estimate, r.se_log_estimate, level);
                return format_double(ci.lower) + "," + format_double(ci.upper);
            });
        } else if (*bayes_fit_cmd) {
            auto set = filter_controls(load_controls(run.input));
            if (negatives_only) set = filter_negative_only(set);
            mcmc.config.seed = run.seed;
            const auto samples = fit_bias_model(parse_bias_model(mcmc.model), set, mcmc.config);
            write_draws_warning_log(log, samples);
            write_draws(run.output, samples, header);
            log.info("wrote " + std::to_string(samples.total_draws()) + " draws");
        } else if (*bayes_cal_cmd) {
            const auto samples = read_draws(draws_path);
            const auto set = load_controls(run.input);
            PredictiveOptions options;
            options.mode = mode == "sampled" ? PredictiveMode::Sampled : PredictiveMode::Mixture;
            options.seed = run.seed;
            options.metropolis_steps = metropolis_steps;
            write_with_columns(run.output, header, set, "cal_lower,cal_upper", [&](const ControlRecord& r) {
                const auto ci = calibrate_posterior(samples, r.log_estimate, r.se_log_estimate, level, options);
                return format_double(ci.lower) + "," + format_double(ci.upper);
            });
        } else if (*inject_cmd) {
            auto cohort = load_cohort(run.input);
            const auto model = fit_poisson_l1(cohort, folds);
            for (const auto& n : model.notices) log.warn(n);
            const auto result = inject(cohort, model, theta, epsilon, run.seed, max_iter);
            for (std::size_t i = 0; i < cohort.entries.size(); ++i)
                cohort.entries[i].outcome_count = result.modified_counts[i];
            write_cohort(run.output,
                         cohort,
                         header + "\n# theta=" + format_double(theta) + " achieved_ratio=" +
                             format_double(result.achieved_ratio) + " iterations=" +
                             std::to_string(result.iterations) + " l1_penalty=" + format_double(model.l1_penalty));
            log.info("achieved ratio " + format_double(result.achieved_ratio) + " after " +
                     std::to_string(result.iterations) + " attempts");
        } else if (*sim_cohort_cmd) {
            cohort_spec.seed = run.seed;
            write_cohort(run.output, simulate_cohort(cohort_spec), header);
        } else if (*sim_cmd) {
            sim.seed = run.seed;
            write_controls(run.output, simulate_control_universe(sim), header);
        } else if (*eval_cmd) {
            const auto universe = load_controls(run.input);
            eval_mcmc.config.seed = run.seed;
            const auto result = run_protocol(universe, parse_training_design(design),
                                             parse_calibration_model(eval_model), eval_mcmc.config, run.seed, protocol);
            for (const auto& w : result.warnings) log.warn(w);
            const ProtocolResult results[] = {result};
            emit_figures(out_dir, results, header, svg);
            log.info("calibrated RMSE " + format_double(result.rmse_calibrated) + ", uncalibrated RMSE " +
                     format_double(result.rmse_uncalibrated));
        } else if (*diag_cmd) {
            const auto samples = read_draws(draws_path);
            const auto report = diagnostics(samples);
            for (const auto& n : report.notices) log.warn(n);
            write_diagnostic_artifacts(out_dir, samples, report, header);
        }
        return kExitOk;
    } catch (const Error& e) {
        switch (e.kind()) {
            case ErrorKind::Usage:
                err << "usage error: " << e.what() << '\n';
                return kExitUsage;
            case ErrorKind::Validation:
                err << "data validation error: " << e.what() << '\n';
                return kExitValidation;
            case ErrorKind::Numerical:
                err << "numerical failure: " << e.what() << '\n';
                return kExitNumerical;
            case ErrorKind::Io:
                err << "i/o error: " << e.what() << '\n';
                return kExitIo;
        }
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
    }
    return kExitInternal;
}

int dispatch(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args, std::cout, std::cerr);
}

}  // namespace empcal
