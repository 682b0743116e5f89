#include "empcal/bayes_bias.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <thread>

#include <boost/math/special_functions/gamma.hpp>

#include "empcal/diagnostics.hpp"
#include "empcal/error.hpp"
#include "empcal/normal.hpp"
#include "empcal/text_io.hpp"
#include "slice_sampler.hpp"

namespace empcal {

std::string to_string(BiasModel model) { return model == BiasModel::Constant ? "constant" : "linear"; }

BiasModel parse_bias_model(const std::string& name) {
    if (name == "constant") return BiasModel::Constant;
    if (name == "linear") return BiasModel::Linear;
    throw UsageError("unknown bias model '" + name + "' (expected constant or linear)");
}

void McmcConfig::validate() const {
    if (chains < 1) throw UsageError("chains must be >= 1");
    if (samples < 1) throw UsageError("samples must be >= 1");
    if (thinning < 1) throw UsageError("thinning must be >= 1");
    if (burn_in < 0) throw UsageError("burn-in must be >= 0");
    if (!(priors.precision_upper > 0.0) || !(priors.mu_variance > 0.0) || !(priors.slope_mean_variance > 0.0) ||
        !(priors.slope_var_variance > 0.0) || !(priors.theta0_variance > 0.0))
        throw UsageError("prior scales must be positive");
    if (fixed_sigma2 && !(*fixed_sigma2 > 0.0 && std::isfinite(*fixed_sigma2)))
        throw UsageError("fixed sigma2 must be positive and finite");
    if (fixed_sigma2 && explicit_latent) throw UsageError("fixed sigma2 is not supported with explicit latent sampling");
}

std::size_t PosteriorSamples::total_draws() const {
    std::size_t n = 0;
    for (const auto& c : chains) n += c.size();
    return n;
}

std::vector<std::string> PosteriorSamples::parameter_names() const {
    if (model == BiasModel::Linear) return {"mu", "sigma2", "slope_mean", "slope_var"};
    return {"mu", "sigma2"};
}

std::vector<std::vector<double>> PosteriorSamples::parameter(const std::string& name) const {
    std::vector<std::vector<double>> out;
    for (const auto& c : chains) {
        if (name == "mu")
            out.push_back(c.mu);
        else if (name == "sigma2")
            out.push_back(c.sigma2);
        else if (name == "slope_mean" && model == BiasModel::Linear)
            out.push_back(c.slope_mean);
        else if (name == "slope_var" && model == BiasModel::Linear)
            out.push_back(c.slope_var);
        else
            throw UsageError("unknown parameter '" + name + "' for the " + to_string(model) + " model");
    }
    return out;
}

std::vector<double> PosteriorSamples::pooled(const std::string& name) const {
    std::vector<double> out;
    for (auto& chain : parameter(name)) out.insert(out.end(), chain.begin(), chain.end());
    return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct TrainingData {
    std::vector<double> bias;   // estimated bias: log estimate - log true effect
    std::vector<double> se2;    // squared standard errors
    std::vector<double> theta;  // log true effect
};

TrainingData prepare(const ControlSet& train, const char* who) {
    TrainingData data;
    for (std::size_t i = 0; i < train.records.size(); ++i) {
        const auto& r = train.records[i];
        if (!r.is_control())
            throw ValidationError(std::string(who) + ": training record " + std::to_string(i + 1) +
                                  " has no true effect size");
        if (!std::isfinite(r.se_log_estimate) || !std::isfinite(r.log_estimate))
            throw ValidationError(std::string(who) + ": training record " + std::to_string(i + 1) +
                                  " has a non-finite estimate");
        data.theta.push_back(r.log_true_effect());
        data.bias.push_back(r.log_estimate - data.theta.back());
        data.se2.push_back(r.se_log_estimate * r.se_log_estimate);
    }
    if (data.bias.size() < 2)
        throw ValidationError(std::string(who) + ": at least 2 training controls are required, found " +
                              std::to_string(data.bias.size()));
    return data;
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
    return std::mt19937_64(seq);
}

// Initial precision from a standard normal draw on log sigma2, kept inside
// the prior support.
double initial_precision(double z, double upper) {
    const double precision = std::exp(-z);
    return std::clamp(precision, 1e-6 * upper, 0.999 * upper);
}

class ChainRecorder {
public:
    ChainRecorder(const McmcConfig& config) : config_(config) {}

    bool burning(int iter) const { return iter < config_.burn_in; }
    bool keep(int iter) const { return !burning(iter) && (iter - config_.burn_in) % config_.thinning == 0; }
    int total() const { return config_.burn_in + config_.samples; }

private:
    const McmcConfig& config_;
};

// Normal full conditional of mu given per-control variances.
template <class Rng>
double draw_mu(const std::vector<double>& values, const std::vector<double>& variances, const BiasPriors& priors,
               Rng& rng) {
    double precision = 1.0 / priors.mu_variance;
    double weighted = priors.mu_mean / priors.mu_variance;
    for (std::size_t i = 0; i < values.size(); ++i) {
        precision += 1.0 / variances[i];
        weighted += values[i] / variances[i];
    }
    std::normal_distribution<double> normal(weighted / precision, std::sqrt(1.0 / precision));
    return normal(rng);
}

ChainDraws run_constant_chain(const TrainingData& data, const McmcConfig& config, int chain) {
    auto rng = stream_rng(config.seed, static_cast<std::uint64_t>(chain));
    std::normal_distribution<double> std_normal(0.0, 1.0);
    const auto& priors = config.priors;
    const std::size_t n = data.bias.size();

    double mu = std_normal(rng);
    double precision = initial_precision(std_normal(rng), priors.precision_upper);
    if (config.fixed_sigma2) precision = 1.0 / *config.fixed_sigma2;
    detail::WidthAdapter width(0.25 * priors.precision_upper);
    std::vector<double> variances(n);

    auto log_density = [&](double p) {
        if (!(p > 0.0 && p < priors.precision_upper)) return -kInf;
        const double s2 = 1.0 / p;
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) ll += normal_logpdf(data.bias[i], mu, s2 + data.se2[i]);
        return ll;
    };

    ChainRecorder recorder(config);
    ChainDraws draws;
    for (int iter = 0; iter < recorder.total(); ++iter) {
        for (std::size_t i = 0; i < n; ++i) variances[i] = 1.0 / precision + data.se2[i];
        mu = draw_mu(data.bias, variances, priors, rng);
        if (!config.fixed_sigma2) {
            precision = detail::slice_sample(precision, log_density, width.width(), 0.0, priors.precision_upper, rng);
            if (recorder.burning(iter)) width.observe(precision);
        }
        if (recorder.keep(iter)) {
            draws.mu.push_back(mu);
            draws.sigma2.push_back(1.0 / precision);
        }
    }
    return draws;
}

// Gibbs sampler over (bias_i, mu, precision) without marginalizing.
ChainDraws run_explicit_chain(const TrainingData& data, const McmcConfig& config, int chain) {
    auto rng = stream_rng(config.seed, static_cast<std::uint64_t>(chain));
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto& priors = config.priors;
    const std::size_t n = data.bias.size();

    double mu = std_normal(rng);
    double precision = initial_precision(std_normal(rng), priors.precision_upper);
    std::vector<double> latent(n), variances(n);

    ChainRecorder recorder(config);
    ChainDraws draws;
    for (int iter = 0; iter < recorder.total(); ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            const double post_precision = precision + 1.0 / data.se2[i];
            const double post_mean = (precision * mu + data.bias[i] / data.se2[i]) / post_precision;
            latent[i] = post_mean + std_normal(rng) / std::sqrt(post_precision);
        }
        std::fill(variances.begin(), variances.end(), 1.0 / precision);
        mu = draw_mu(latent, variances, priors, rng);

        // precision | latent, mu ~ Gamma(n/2 + 1, rate = S/2) truncated to (0, upper).
        double ss = 0.0;
        for (double b : latent) ss += (b - mu) * (b - mu);
        const double shape = 0.5 * static_cast<double>(n) + 1.0;
        const double rate = 0.5 * ss;
        const double upper_mass = boost::math::gamma_p(shape, rate * priors.precision_upper);
        double u = unif(rng) * upper_mass;
        if (u <= 0.0) u = std::numeric_limits<double>::min();
        precision = std::min(boost::math::gamma_p_inv(shape, u) / rate, priors.precision_upper);

        if (recorder.keep(iter)) {
            draws.mu.push_back(mu);
            draws.sigma2.push_back(1.0 / precision);
        }
    }
    return draws;
}

ChainDraws run_linear_chain(const TrainingData& data, const McmcConfig& config, int chain) {
    auto rng = stream_rng(config.seed, static_cast<std::uint64_t>(chain));
    std::normal_distribution<double> std_normal(0.0, 1.0);
    const auto& priors = config.priors;
    const std::size_t n = data.bias.size();
    std::vector<double> abs_theta(n);
    for (std::size_t i = 0; i < n; ++i) abs_theta[i] = std::abs(data.theta[i]);

    double mu = std_normal(rng);
    double slope_mean = std_normal(rng);
    double precision = initial_precision(std_normal(rng), priors.precision_upper);
    double slope_var = std_normal(rng);

    auto feasible = [&](double sigma2, double sv) {
        for (std::size_t i = 0; i < n; ++i)
            if (!(sigma2 + sv * abs_theta[i] + data.se2[i] > 0.0)) return false;
        return true;
    };
    if (!feasible(1.0 / precision, slope_var)) slope_var = 0.0;

    auto log_likelihood = [&](double sigma2, double sv) {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = sigma2 + sv * abs_theta[i] + data.se2[i];
            if (!(v > 0.0)) return -kInf;
            ll += normal_logpdf(data.bias[i], mu + slope_mean * data.theta[i], v);
        }
        return ll;
    };
    auto precision_density = [&](double p) {
        if (!(p > 0.0 && p < priors.precision_upper)) return -kInf;
        return log_likelihood(1.0 / p, slope_var);
    };
    auto slope_var_density = [&](double sv) {
        return log_likelihood(1.0 / precision, sv) - 0.5 * sv * sv / priors.slope_var_variance;
    };

    detail::WidthAdapter precision_width(0.25 * priors.precision_upper);
    detail::WidthAdapter slope_var_width(0.1);
    std::vector<double> weights(n);

    ChainRecorder recorder(config);
    ChainDraws draws;
    for (int iter = 0; iter < recorder.total(); ++iter) {
        // (mu, slope_mean) jointly: weighted regression with Normal priors.
        const double sigma2 = 1.0 / precision;
        double s0 = 0, s1 = 0, s2 = 0, r0 = 0, r1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = 1.0 / (sigma2 + slope_var * abs_theta[i] + data.se2[i]);
            s0 += w;
            s1 += w * data.theta[i];
            s2 += w * data.theta[i] * data.theta[i];
            r0 += w * data.bias[i];
            r1 += w * data.theta[i] * data.bias[i];
        }
        const double q00 = s0 + 1.0 / priors.mu_variance;
        const double q01 = s1;
        const double q11 = s2 + 1.0 / priors.slope_mean_variance;
        const double b0 = r0 + priors.mu_mean / priors.mu_variance;
        const double det = q00 * q11 - q01 * q01;
        const double m0 = (q11 * b0 - q01 * r1) / det;
        const double m1 = (q00 * r1 - q01 * b0) / det;
        // Q = L L^T; a draw is mean + L^{-T} z.
        const double l00 = std::sqrt(q00);
        const double l10 = q01 / l00;
        const double l11 = std::sqrt(q11 - l10 * l10);
        const double z0 = std_normal(rng), z1 = std_normal(rng);
        const double x1 = z1 / l11;
        const double x0 = (z0 - l10 * x1) / l00;
        mu = m0 + x0;
        slope_mean = m1 + x1;

        precision =
            detail::slice_sample(precision, precision_density, precision_width.width(), 0.0, priors.precision_upper, rng);
        slope_var = detail::slice_sample(slope_var, slope_var_density, slope_var_width.width(), -kInf, kInf, rng);
        if (recorder.burning(iter)) {
            precision_width.observe(precision);
            slope_var_width.observe(slope_var);
        }
        if (recorder.keep(iter)) {
            draws.mu.push_back(mu);
            draws.sigma2.push_back(1.0 / precision);
            draws.slope_mean.push_back(slope_mean);
            draws.slope_var.push_back(slope_var);
        }
    }
    return draws;
}

template <class ChainFn>
std::vector<ChainDraws> run_chains(const McmcConfig& config, ChainFn&& fn) {
    std::vector<ChainDraws> chains(static_cast<std::size_t>(config.chains));
    if (config.parallel && config.chains > 1) {
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> failures(chains.size());
        for (int c = 0; c < config.chains; ++c) {
            workers.emplace_back([&, c] {
                try {
                    chains[static_cast<std::size_t>(c)] = fn(c);
                } catch (...) {
                    failures[static_cast<std::size_t>(c)] = std::current_exception();
                }
            });
        }
        for (auto& w : workers) w.join();
        for (auto& f : failures)
            if (f) std::rethrow_exception(f);
    } else {
        for (int c = 0; c < config.chains; ++c) chains[static_cast<std::size_t>(c)] = fn(c);
    }
    return chains;
}

void attach_convergence_warnings(PosteriorSamples& samples) {
    if (samples.chains.size() < 2) {
        samples.warnings.push_back("single chain: potential scale reduction not computed");
        return;
    }
    for (const auto& name : samples.parameter_names()) {
        const double rhat = potential_scale_reduction(samples.parameter(name));
        if (!(rhat <= 1.1))
            samples.warnings.push_back("potential scale reduction for " + name + " is " + format_double(rhat) +
                                       " (> 1.1)");
    }
}

}  // namespace

PosteriorSamples fit_constant(const ControlSet& train, const McmcConfig& config) {
    config.validate();
    const auto data = prepare(train, "fit_constant");
    PosteriorSamples samples;
    samples.model = BiasModel::Constant;
    samples.priors = config.priors;
    samples.seed = config.seed;
    samples.n_controls = data.bias.size();
    samples.chains = run_chains(config, [&](int c) {
        return config.explicit_latent ? run_explicit_chain(data, config, c) : run_constant_chain(data, config, c);
    });
    attach_convergence_warnings(samples);
    return samples;
}

PosteriorSamples fit_linear(const ControlSet& train, const McmcConfig& config) {
    config.validate();
    if (config.explicit_latent || config.fixed_sigma2)
        throw UsageError("fit_linear: explicit latent sampling and fixed sigma2 apply to the constant model only");
    const auto data = prepare(train, "fit_linear");
    std::set<double> levels(data.theta.begin(), data.theta.end());
    if (levels.size() < 2)
        throw ValidationError("fit_linear: training controls need at least two distinct true effect sizes");
    PosteriorSamples samples;
    samples.model = BiasModel::Linear;
    samples.priors = config.priors;
    samples.seed = config.seed;
    samples.n_controls = data.bias.size();
    samples.chains = run_chains(config, [&](int c) { return run_linear_chain(data, config, c); });
    attach_convergence_warnings(samples);
    return samples;
}

PosteriorSamples fit_bias_model(BiasModel model, const ControlSet& train, const McmcConfig& config) {
    return model == BiasModel::Constant ? fit_constant(train, config) : fit_linear(train, config);
}

double sample_quantile(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

void check_calibration_inputs(const PosteriorSamples& samples, double se, double level) {
    if (!(se > 0.0) || !std::isfinite(se)) throw ValidationError("calibrate_posterior: se must be positive and finite");
    if (!(level > 0.0 && level < 1.0)) throw UsageError("calibrate_posterior: level must lie in (0, 1)");
    if (samples.total_draws() == 0) throw ValidationError("calibrate_posterior: no posterior draws");
}

// theta0 ~ mixture over draws of N(log_estimate - mu, sigma2 + se^2).
class PredictiveMixture {
public:
    PredictiveMixture(const PosteriorSamples& samples, double log_estimate, double se) {
        for (const auto& c : samples.chains) {
            for (std::size_t i = 0; i < c.size(); ++i) {
                centers_.push_back(log_estimate - c.mu[i]);
                scales_.push_back(std::sqrt(c.sigma2[i] + se * se));
            }
        }
    }

    double cdf(double x, double* density = nullptr) const {
        double f = 0.0, p = 0.0;
        for (std::size_t s = 0; s < centers_.size(); ++s) {
            const double z = (x - centers_[s]) / scales_[s];
            f += normal_cdf(z);
            if (density) p += std::exp(-0.5 * z * z) / scales_[s];
        }
        const double n = static_cast<double>(centers_.size());
        if (density) *density = p / (n * std::sqrt(2.0 * std::numbers::pi));
        return f / n;
    }

    double quantile(double q) const {
        const auto [cmin, cmax] = std::minmax_element(centers_.begin(), centers_.end());
        const double smax = *std::max_element(scales_.begin(), scales_.end());
        double lo = *cmin - 12.0 * smax;
        double hi = *cmax + 12.0 * smax;
        double x = 0.5 * (lo + hi);
        for (int iter = 0; iter < 200 && hi - lo > 1e-11; ++iter) {
            double density = 0.0;
            const double f = cdf(x, &density) - q;
            if (f == 0.0) return x;
            (f < 0.0 ? lo : hi) = x;
            double next = density > 0.0 ? x - f / density : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - x) < 1e-12) return next;
            x = next;
        }
        return x;
    }

private:
    std::vector<double> centers_;
    std::vector<double> scales_;
};

}  // namespace

std::vector<double> predictive_draws(const PosteriorSamples& samples, double log_estimate, double se,
                                     std::uint64_t seed, int metropolis_steps) {
    auto rng = stream_rng(seed, 0xca1b);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> out;
    out.reserve(samples.total_draws());

    if (samples.model == BiasModel::Constant) {
        for (const auto& c : samples.chains) {
            for (std::size_t i = 0; i < c.size(); ++i) {
                const double bias0 = c.mu[i] + std::sqrt(c.sigma2[i]) * std_normal(rng);
                out.push_back(log_estimate - bias0 + se * std_normal(rng));
            }
        }
        return out;
    }

    // Linear model: theta0 is latent and its own bias depends on it, so it is
    // updated by random-walk Metropolis alongside the parameter draws.
    const double prior_var = samples.priors.theta0_variance;
    const double se2 = se * se;
    auto log_target = [&](double t, double mu, double sigma2, double sm, double sv) {
        const double v = sigma2 + sv * std::abs(t) + se2;
        if (!(v > 0.0)) return -kInf;
        return -0.5 * t * t / prior_var + normal_logpdf(log_estimate, t + mu + sm * t, v);
    };
    const auto& first = samples.chains.front();
    double theta0 = (log_estimate - first.mu[0]) / std::max(std::abs(1.0 + first.slope_mean[0]), 0.1);
    const int steps = std::max(1, metropolis_steps);
    bool warm = false;
    for (const auto& c : samples.chains) {
        for (std::size_t i = 0; i < c.size(); ++i) {
            const double mu = c.mu[i], s2 = c.sigma2[i], sm = c.slope_mean[i], sv = c.slope_var[i];
            const double step = 1.5 * std::sqrt(s2 + se2) / std::max(std::abs(1.0 + sm), 0.1);
            double current = log_target(theta0, mu, s2, sm, sv);
            const int n_steps = warm ? steps : 20 * steps;
            for (int k = 0; k < n_steps; ++k) {
                const double proposal = theta0 + step * std_normal(rng);
                const double candidate = log_target(proposal, mu, s2, sm, sv);
                if (std::log(unif(rng)) < candidate - current) {
                    theta0 = proposal;
                    current = candidate;
                }
            }
            warm = true;
            out.push_back(theta0);
        }
    }
    return out;
}

CalibratedInterval calibrate_posterior(const PosteriorSamples& samples, double log_estimate, double se, double level,
                                       const PredictiveOptions& options) {
    check_calibration_inputs(samples, se, level);
    const double alpha = 1.0 - level;
    CalibratedInterval interval{0.0, 0.0, "calibrated", to_string(samples.model), options.seed};
    if (samples.model == BiasModel::Constant && options.mode == PredictiveMode::Mixture) {
        const PredictiveMixture mixture(samples, log_estimate, se);
        interval.lower = mixture.quantile(0.5 * alpha);
        interval.upper = mixture.quantile(1.0 - 0.5 * alpha);
        return interval;
    }
    auto draws = predictive_draws(samples, log_estimate, se, options.seed, options.metropolis_steps);
    interval.lower = sample_quantile(draws, 0.5 * alpha);
    interval.upper = sample_quantile(std::move(draws), 1.0 - 0.5 * alpha);
    return interval;
}

void write_draws(const std::filesystem::path& path, const PosteriorSamples& samples,
                 const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    if (!header_comment.empty()) out << header_comment << '\n';
    out << "# model=" << to_string(samples.model) << " n_controls=" << samples.n_controls << '\n';
    for (const auto& w : samples.warnings) out << "# warning: " << w << '\n';
    const bool linear = samples.model == BiasModel::Linear;
    out << "chain,iter,mu,sigma2" << (linear ? ",slope_mean,slope_var" : "") << '\n';
    for (std::size_t c = 0; c < samples.chains.size(); ++c) {
        const auto& ch = samples.chains[c];
        for (std::size_t i = 0; i < ch.size(); ++i) {
            out << c + 1 << ',' << i + 1 << ',' << format_double(ch.mu[i]) << ',' << format_double(ch.sigma2[i]);
            if (linear) out << ',' << format_double(ch.slope_mean[i]) << ',' << format_double(ch.slope_var[i]);
            out << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

PosteriorSamples read_draws(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open draws file: " + path.string());
    PosteriorSamples samples;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') {
            const auto pos = line.find("seed=");
            if (pos != std::string::npos) {
                try {
                    samples.seed = parse_u64(line.substr(pos + 5, line.find(' ', pos) - pos - 5));
                } catch (const ValidationError&) {
                }
            }
            continue;
        }
        const auto fields = split_csv_line(line);
        if (!have_header) {
            if (line.rfind("chain,iter,mu,sigma2,slope_mean,slope_var", 0) == 0 && fields.size() == 6)
                samples.model = BiasModel::Linear;
            else if (line.rfind("chain,iter,mu,sigma2", 0) == 0 && fields.size() == 4)
                samples.model = BiasModel::Constant;
            else
                throw ValidationError(path.string() + ": unexpected draws header");
            have_header = true;
            continue;
        }
        const std::size_t expected = samples.model == BiasModel::Linear ? 6 : 4;
        const std::string where = path.string() + ": row " + std::to_string(line_no);
        if (fields.size() != expected) throw ValidationError(where + ": wrong column count");
        const auto chain = parse_u64(fields[0]);
        if (chain < 1) throw ValidationError(where + ": chain index starts at 1");
        if (samples.chains.size() < chain) samples.chains.resize(chain);
        auto& c = samples.chains[chain - 1];
        c.mu.push_back(parse_double(fields[2]));
        c.sigma2.push_back(parse_double(fields[3]));
        if (!(c.sigma2.back() > 0.0)) throw ValidationError(where + ": sigma2 must be > 0");
        if (expected == 6) {
            c.slope_mean.push_back(parse_double(fields[4]));
            c.slope_var.push_back(parse_double(fields[5]));
        }
    }
    if (!have_header) throw ValidationError(path.string() + ": missing draws header");
    if (samples.total_draws() == 0) throw ValidationError(path.string() + ": no draws");
    return samples;
}

}  // namespace empcal
