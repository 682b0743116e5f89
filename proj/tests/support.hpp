#pragma once

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "empcal/control_data.hpp"

namespace testing {

using empcal::ControlRecord;
using empcal::ControlSet;

inline ControlRecord record(const std::string& family, double effect, double log_estimate, double se,
                            const std::string& outcome = {}) {
    ControlRecord r;
    r.database_id = "DB";
    r.target_id = "T";
    r.comparator_id = "C";
    r.family_id = family;
    r.outcome_id = outcome.empty() ? family + (effect == 1.0 ? std::string() : "-" + std::to_string(effect)) : outcome;
    r.true_effect_size = effect;
    r.log_estimate = log_estimate;
    r.se_log_estimate = se;
    return r;
}

inline ControlSet negatives(const std::vector<double>& estimates, const std::vector<double>& ses) {
    ControlSet set;
    for (std::size_t i = 0; i < estimates.size(); ++i)
        set.records.push_back(record("F" + std::to_string(i), 1.0, estimates[i], ses[i]));
    return set;
}

// Normal CDF in 50-digit arithmetic, independent of the library's erfc path.
inline double hp_normal_cdf(double x) {
    using big = boost::multiprecision::cpp_bin_float_50;
    const big z = -big(x) / boost::multiprecision::sqrt(big(2));
    return static_cast<double>(big(0.5) * boost::math::erfc(z));
}

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("empcal_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace testing
