#include "empcal/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "empcal/bayes_bias.hpp"
#include "empcal/error.hpp"
#include "empcal/text_io.hpp"

namespace empcal {

namespace {

double mean_of(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

// Biased autocovariance at lags 0..max_lag.
std::vector<double> autocovariance(std::span<const double> x, std::size_t max_lag) {
    const std::size_t n = x.size();
    const double m = mean_of(x);
    max_lag = std::min(max_lag, n - 1);
    std::vector<double> out(max_lag + 1, 0.0);
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
        double s = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - m) * (x[i + lag] - m);
        out[lag] = s / static_cast<double>(n);
    }
    return out;
}

std::size_t common_length(const std::vector<std::vector<double>>& chains) {
    if (chains.empty()) throw ValidationError("no chains");
    std::size_t n = chains.front().size();
    for (const auto& c : chains) n = std::min(n, c.size());
    return n;
}

}  // namespace

double potential_scale_reduction(const std::vector<std::vector<double>>& chains) {
    const std::size_t m = chains.size();
    const std::size_t n = common_length(chains);
    if (m < 2 || n < 2) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> means(m);
    double within = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        std::span<const double> x(chains[c].data(), n);
        means[c] = mean_of(x);
        within += variance_of(x);
    }
    within /= static_cast<double>(m);
    const double between = static_cast<double>(n) * variance_of(means);
    const double nn = static_cast<double>(n);
    const double pooled = (nn - 1.0) / nn * within + between / nn;
    if (within <= 0.0) return between > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    return std::sqrt(pooled / within);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
    const std::size_t m = chains.size();
    const std::size_t n = common_length(chains);
    const double total = static_cast<double>(m * n);
    if (n < 4) return total;

    std::vector<std::vector<double>> acov(m);
    std::vector<double> means(m);
    double within = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        std::span<const double> x(chains[c].data(), n);
        acov[c] = autocovariance(x, n - 1);
        means[c] = mean_of(x);
        within += acov[c][0] * static_cast<double>(n) / static_cast<double>(n - 1);
    }
    within /= static_cast<double>(m);
    const double nn = static_cast<double>(n);
    const double between = m > 1 ? nn * variance_of(means) : 0.0;
    const double var_plus = (nn - 1.0) / nn * within + between / nn;
    if (!(var_plus > 0.0)) return total;

    auto rho = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t c = 0; c < m; ++c) s += acov[c][lag];
        s /= static_cast<double>(m);
        return 1.0 - (within - s) / var_plus;
    };

    // Geyer: sum pairs while positive, enforcing monotone decrease.
    double tau = -1.0;
    double previous_pair = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t + 1 < n; t += 2) {
        double pair = rho(t) + rho(t + 1);
        if (pair <= 0.0) break;
        pair = std::min(pair, previous_pair);
        previous_pair = pair;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1.0 / std::log10(total));
    return total / tau;
}

std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag) {
    if (series.size() < 2) throw ValidationError("autocorrelation needs at least 2 values");
    auto acov = autocovariance(series, max_lag);
    const double v0 = acov[0];
    for (auto& a : acov) a = v0 > 0.0 ? a / v0 : 0.0;
    acov[0] = 1.0;
    return acov;
}

const ParameterDiagnostics& DiagnosticReport::at(const std::string& name) const {
    for (const auto& p : parameters)
        if (p.name == name) return p;
    throw UsageError("no diagnostics for parameter '" + name + "'");
}

bool DiagnosticReport::converged(double rhat_threshold) const {
    for (const auto& p : parameters)
        if (std::isfinite(p.rhat) ? p.rhat > rhat_threshold : !std::isnan(p.rhat)) return false;
    return true;
}

DiagnosticReport diagnostics(const PosteriorSamples& samples, std::size_t max_lag) {
    DiagnosticReport report;
    if (samples.chains.size() < 2)
        report.notices.push_back("single chain: potential scale reduction omitted");
    for (const auto& name : samples.parameter_names()) {
        const auto chains = samples.parameter(name);
        const auto pooled = samples.pooled(name);
        ParameterDiagnostics d;
        d.name = name;
        d.mean = mean_of(pooled);
        d.sd = std::sqrt(variance_of(pooled));
        d.rhat = potential_scale_reduction(chains);
        d.ess = effective_sample_size(chains);
        d.mcse = d.ess > 0.0 ? d.sd / std::sqrt(d.ess) : std::numeric_limits<double>::infinity();
        const std::size_t lags = std::min(max_lag, common_length(chains) - 1);
        d.autocorrelation.assign(lags + 1, 0.0);
        for (const auto& c : chains) {
            const auto acf = autocorrelation(c, lags);
            for (std::size_t k = 0; k <= lags; ++k) d.autocorrelation[k] += acf[k] / static_cast<double>(chains.size());
        }
        if (std::isfinite(d.rhat) && d.rhat > 1.1)
            report.notices.push_back("potential scale reduction for " + name + " is " + format_double(d.rhat));
        report.parameters.push_back(std::move(d));
    }
    return report;
}

namespace {

std::ofstream open_artifact(const std::filesystem::path& path, const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    if (!header_comment.empty()) out << header_comment << '\n';
    return out;
}

}  // namespace

void write_diagnostic_artifacts(const std::filesystem::path& dir, const PosteriorSamples& samples,
                                const DiagnosticReport& report, const std::string& header_comment,
                                std::size_t histogram_bins) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

    {
        auto out = open_artifact(dir / "diagnostics_summary.csv", header_comment);
        for (const auto& n : report.notices) out << "# notice: " << n << '\n';
        out << "parameter,mean,sd,rhat,ess,mcse\n";
        for (const auto& p : report.parameters)
            out << p.name << ',' << format_double(p.mean) << ',' << format_double(p.sd) << ','
                << (std::isnan(p.rhat) ? std::string("NA") : format_double(p.rhat)) << ',' << format_double(p.ess)
                << ',' << format_double(p.mcse) << '\n';
    }
    {
        auto out = open_artifact(dir / "trace.csv", header_comment);
        out << "parameter,chain,iter,value\n";
        for (const auto& name : samples.parameter_names()) {
            const auto chains = samples.parameter(name);
            for (std::size_t c = 0; c < chains.size(); ++c)
                for (std::size_t i = 0; i < chains[c].size(); ++i)
                    out << name << ',' << c + 1 << ',' << i + 1 << ',' << format_double(chains[c][i]) << '\n';
        }
    }
    {
        auto out = open_artifact(dir / "histogram.csv", header_comment);
        out << "parameter,bin_lower,bin_upper,count\n";
        for (const auto& name : samples.parameter_names()) {
            const auto values = samples.pooled(name);
            const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
            const double lo = *lo_it;
            const double span = *hi_it > lo ? *hi_it - lo : 1.0;
            std::vector<std::size_t> counts(histogram_bins, 0);
            for (double v : values) {
                auto bin = static_cast<std::size_t>((v - lo) / span * static_cast<double>(histogram_bins));
                ++counts[std::min(bin, histogram_bins - 1)];
            }
            for (std::size_t b = 0; b < histogram_bins; ++b)
                out << name << ',' << format_double(lo + span * static_cast<double>(b) / histogram_bins) << ','
                    << format_double(lo + span * static_cast<double>(b + 1) / histogram_bins) << ',' << counts[b]
                    << '\n';
        }
    }
    {
        auto out = open_artifact(dir / "ecdf.csv", header_comment);
        out << "parameter,value,ecdf\n";
        for (const auto& name : samples.parameter_names()) {
            auto values = samples.pooled(name);
            std::sort(values.begin(), values.end());
            // At most 200 evenly spaced points keep the file plot-sized.
            const std::size_t step = std::max<std::size_t>(1, values.size() / 200);
            for (std::size_t i = step - 1; i < values.size(); i += step)
                out << name << ',' << format_double(values[i]) << ','
                    << format_double(static_cast<double>(i + 1) / static_cast<double>(values.size())) << '\n';
        }
    }
    {
        auto out = open_artifact(dir / "autocorrelation.csv", header_comment);
        out << "parameter,lag,acf\n";
        for (const auto& p : report.parameters)
            for (std::size_t k = 0; k < p.autocorrelation.size(); ++k)
                out << p.name << ',' << k << ',' << format_double(p.autocorrelation[k]) << '\n';
    }
}

}  // namespace empcal
