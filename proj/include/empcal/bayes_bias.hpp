#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "empcal/control_data.hpp"
#include "empcal/interval.hpp"

namespace empcal {

enum class BiasModel { Constant, Linear };

std::string to_string(BiasModel model);
BiasModel parse_bias_model(const std::string& name);

// Hyperparameters of the hierarchical bias models. Variances, not standard
// deviations. The precision 1/sigma^2 has a Uniform(0, precision_upper)
// prior, so sigma^2 > 1/precision_upper.
struct BiasPriors {
    double mu_mean = 0.0;
    double mu_variance = 50.0;
    double precision_upper = 100.0;
    double slope_mean_variance = 50.0;
    double slope_var_variance = 50.0;
    // Prior on the target log effect when it is latent (linear model only).
    double theta0_variance = 50.0;
};

struct McmcConfig {
    int chains = 3;
    int burn_in = 1000;  // discarded; slice widths adapt only here
    int samples = 1000;  // post burn-in iterations per chain
    int thinning = 1;
    std::uint64_t seed = 0;
    bool parallel = true;
    // Constant model only: sample the per-control biases explicitly instead
    // of integrating them out of the likelihood.
    bool explicit_latent = false;
    // Constant model only: hold sigma2 at this value (known-variance model).
    std::optional<double> fixed_sigma2;
    BiasPriors priors;

    void validate() const;
};

struct ChainDraws {
    std::vector<double> mu;
    std::vector<double> sigma2;
    std::vector<double> slope_mean;  // linear model only
    std::vector<double> slope_var;   // linear model only

    std::size_t size() const { return mu.size(); }
};

struct PosteriorSamples {
    BiasModel model = BiasModel::Constant;
    std::vector<ChainDraws> chains;
    BiasPriors priors;
    std::uint64_t seed = 0;
    std::size_t n_controls = 0;
    std::vector<std::string> warnings;  // e.g. potential scale reduction above 1.1

    std::size_t total_draws() const;
    std::vector<std::string> parameter_names() const;
    // Per-chain draws of a named parameter.
    std::vector<std::vector<double>> parameter(const std::string& name) const;
    // All chains concatenated.
    std::vector<double> pooled(const std::string& name) const;
};

// Constant bias model: bias_i ~ N(mu, sigma2), estimated bias ~ N(bias_i, se_i^2).
// Every record needs a true effect size; at least two records.
PosteriorSamples fit_constant(const ControlSet& train, const McmcConfig& config);

// Linear bias model: bias_i ~ N(mu + slope_mean*theta_i, sigma2 + slope_var*|theta_i|).
// States with non-positive per-control variance have zero posterior density.
PosteriorSamples fit_linear(const ControlSet& train, const McmcConfig& config);

PosteriorSamples fit_bias_model(BiasModel model, const ControlSet& train, const McmcConfig& config);

enum class PredictiveMode {
    // Constant model: exact quantiles of the Normal mixture over retained draws.
    Mixture,
    // One predictive draw per retained draw; Metropolis on theta0 for the linear model.
    Sampled,
};

struct PredictiveOptions {
    PredictiveMode mode = PredictiveMode::Mixture;
    std::uint64_t seed = 0;
    int metropolis_steps = 5;  // linear model: updates of theta0 per retained draw
};

// Predictive draws of the target log effect theta0 given one estimate.
std::vector<double> predictive_draws(const PosteriorSamples& samples, double log_estimate, double se,
                                     std::uint64_t seed, int metropolis_steps = 5);

// Equal-tailed posterior interval for theta0 at the given level. The linear
// model always uses the sampled route.
CalibratedInterval calibrate_posterior(const PosteriorSamples& samples, double log_estimate, double se,
                                       double level = 0.95, const PredictiveOptions& options = {});

// Draws CSV: "chain,iter,mu,sigma2[,slope_mean,slope_var]" preceded by '#' comment lines.
void write_draws(const std::filesystem::path& path, const PosteriorSamples& samples,
                 const std::string& header_comment);
PosteriorSamples read_draws(const std::filesystem::path& path);

// Type-7 (linear interpolation) sample quantile; sorts a copy.
double sample_quantile(std::vector<double> values, double p);

}  // namespace empcal
