#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace empcal {

// One estimate for a negative control, a synthetic positive control, or an
// outcome of interest (no true_effect_size).
struct ControlRecord {
    std::string database_id;
    std::string target_id;
    std::string comparator_id;
    std::string outcome_id;
    std::string family_id;
    std::optional<double> true_effect_size;  // ratio scale
    double log_estimate = 0.0;
    double se_log_estimate = 1.0;

    bool is_negative_control() const { return true_effect_size && *true_effect_size == 1.0; }
    bool is_control() const { return true_effect_size.has_value(); }

    // log of the true effect size; requires is_control().
    double log_true_effect() const;

    // Estimated bias: log_estimate - log(true effect size).
    double estimated_bias() const { return log_estimate - log_true_effect(); }
};

struct ControlScope {
    std::string database_id;
    std::string analysis;
};

struct ControlSet {
    std::vector<ControlRecord> records;
    ControlScope scope;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    std::size_t negative_count() const;

    // Distinct family ids in first-appearance order.
    std::vector<std::string> families() const;
};

struct SplitPlan {
    std::set<std::string> train_families;
    std::set<std::string> test_families;
    double fraction = 0.8;
    std::uint64_t seed = 0;
};

enum class ControlFormat { Csv };

inline constexpr const char* kControlCsvHeader =
    "database_id,target_id,comparator_id,outcome_id,family_id,true_effect_size,log_estimate,se_log_estimate";

// Checks per-record invariants and the family linkage rule; throws
// ValidationError naming the first offending record.
void validate_controls(const ControlSet& set);

ControlSet load_controls(const std::filesystem::path& path, ControlFormat format = ControlFormat::Csv);
ControlSet parse_controls(std::istream& in, const std::string& source_name = "<stream>");

// Lines beginning with '#' are skipped by the reader, so callers may prefix
// provenance comments.
void write_controls(std::ostream& out, const ControlSet& set);
void write_controls(const std::filesystem::path& path, const ControlSet& set,
                    const std::string& header_comment = {});

// Families (a negative control plus its derived positives) are assigned to
// one side atomically. Train family count is round(fraction * families),
// clamped to [1, families - 1].
SplitPlan split_by_family(const ControlSet& set, double fraction, std::uint64_t seed);

// Grouped k-fold: fold k holds out the k-th block of a seeded permutation of
// families. Every family is tested exactly once across the returned plans.
std::vector<SplitPlan> rotate_by_family(const ControlSet& set, std::size_t folds, std::uint64_t seed);

ControlSet select_families(const ControlSet& set, const std::set<std::string>& families);
ControlSet filter_negative_only(const ControlSet& set);
ControlSet filter_controls(const ControlSet& set);

}  // namespace empcal
