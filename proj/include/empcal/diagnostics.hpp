#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace empcal {

struct PosteriorSamples;

struct ParameterDiagnostics {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double rhat = 0.0;  // NaN with a single chain
    double ess = 0.0;
    double mcse = 0.0;  // sd / sqrt(ess)
    std::vector<double> autocorrelation;  // lags 0..max_lag, chain-averaged
};

struct DiagnosticReport {
    std::vector<ParameterDiagnostics> parameters;
    std::vector<std::string> notices;

    const ParameterDiagnostics& at(const std::string& name) const;
    bool converged(double rhat_threshold = 1.1) const;
};

// Gelman-Rubin statistic sqrt(((n-1)/n W + B/n) / W) over equal-length chains.
double potential_scale_reduction(const std::vector<std::vector<double>>& chains);

// Multi-chain effective sample size with Geyer's initial monotone sequence.
double effective_sample_size(const std::vector<std::vector<double>>& chains);

std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag);

DiagnosticReport diagnostics(const PosteriorSamples& samples, std::size_t max_lag = 50);

// Writes diagnostics_summary.csv, trace.csv, histogram.csv, ecdf.csv and
// autocorrelation.csv into dir.
void write_diagnostic_artifacts(const std::filesystem::path& dir, const PosteriorSamples& samples,
                                const DiagnosticReport& report, const std::string& header_comment,
                                std::size_t histogram_bins = 30);

}  // namespace empcal
