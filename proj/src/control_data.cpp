#include "empcal/control_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

#include "empcal/error.hpp"
#include "empcal/text_io.hpp"

namespace empcal {

double ControlRecord::log_true_effect() const {
    if (!true_effect_size) throw ValidationError("record for outcome '" + outcome_id + "' has no true effect size");
    return std::log(*true_effect_size);
}

std::size_t ControlSet::negative_count() const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const auto& r) { return r.is_negative_control(); }));
}

std::vector<std::string> ControlSet::families() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& r : records)
        if (seen.insert(r.family_id).second) out.push_back(r.family_id);
    return out;
}

namespace {

std::string describe(const ControlRecord& r) {
    return "(" + r.target_id + "," + r.comparator_id + "," + r.outcome_id + "," + r.database_id + ")";
}

// Returns an empty string when the record satisfies the invariants.
std::string record_violation(const ControlRecord& r) {
    if (!std::isfinite(r.log_estimate)) return "log_estimate must be finite";
    if (!std::isfinite(r.se_log_estimate)) return "se_log_estimate must be finite";
    if (!(r.se_log_estimate > 0.0)) return "se_log_estimate must be > 0";
    if (r.true_effect_size && !(*r.true_effect_size > 0.0 && std::isfinite(*r.true_effect_size)))
        return "true_effect_size must be > 0";
    if (r.family_id.empty()) return "family_id must not be empty";
    return {};
}

using RecordKey = std::tuple<std::string, std::string, std::string, std::string, double>;

RecordKey key_of(const ControlRecord& r) {
    return {r.target_id, r.comparator_id, r.outcome_id, r.database_id, r.true_effect_size.value_or(-1.0)};
}

void check_linkage(const ControlSet& set) {
    std::map<std::tuple<std::string, std::string, std::string>, int> negatives;
    for (const auto& r : set.records)
        if (r.is_negative_control()) ++negatives[{r.target_id, r.comparator_id, r.family_id}];
    for (std::size_t i = 0; i < set.records.size(); ++i) {
        const auto& r = set.records[i];
        if (!r.is_control() || r.is_negative_control()) continue;
        auto it = negatives.find({r.target_id, r.comparator_id, r.family_id});
        const int matches = it == negatives.end() ? 0 : it->second;
        if (matches != 1)
            throw ValidationError("record " + std::to_string(i + 1) + " " + describe(r) + ": positive control family_id '" +
                                  r.family_id + "' matches " + std::to_string(matches) +
                                  " negative controls with the same target and comparator (expected 1)");
    }
}

}  // namespace

void validate_controls(const ControlSet& set) {
    std::set<RecordKey> keys;
    for (std::size_t i = 0; i < set.records.size(); ++i) {
        const auto& r = set.records[i];
        if (auto why = record_violation(r); !why.empty())
            throw ValidationError("record " + std::to_string(i + 1) + " " + describe(r) + ": " + why);
        if (!keys.insert(key_of(r)).second)
            throw ValidationError("record " + std::to_string(i + 1) + " " + describe(r) + ": duplicate key");
    }
    check_linkage(set);
}

ControlSet parse_controls(std::istream& in, const std::string& source_name) {
    static const char* kColumns[] = {"database_id", "target_id",        "comparator_id", "outcome_id",
                                     "family_id",   "true_effect_size", "log_estimate",  "se_log_estimate"};
    ControlSet set;
    std::set<RecordKey> keys;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#' || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (!have_header) {
            if (fields.size() != 8 || !std::equal(fields.begin(), fields.end(), std::begin(kColumns)))
                throw ValidationError(source_name + ": header must be '" + kControlCsvHeader + "'");
            have_header = true;
            continue;
        }
        const std::string where = source_name + ": row " + std::to_string(line_no);
        if (fields.size() != 8)
            throw ValidationError(where + ": expected 8 columns, found " + std::to_string(fields.size()));
        ControlRecord r;
        r.database_id = fields[0];
        r.target_id = fields[1];
        r.comparator_id = fields[2];
        r.outcome_id = fields[3];
        r.family_id = fields[4];
        auto number = [&](std::size_t col) {
            try {
                return parse_double(fields[col]);
            } catch (const ValidationError& e) {
                throw ValidationError(where + ", column " + kColumns[col] + ": " + e.what());
            }
        };
        if (!fields[5].empty()) r.true_effect_size = number(5);
        r.log_estimate = number(6);
        r.se_log_estimate = number(7);
        if (auto why = record_violation(r); !why.empty()) throw ValidationError(where + ": " + why);
        if (!keys.insert(key_of(r)).second) throw ValidationError(where + ": duplicate key " + describe(r));
        if (set.scope.database_id.empty()) set.scope.database_id = r.database_id;
        set.records.push_back(std::move(r));
    }
    if (!have_header) throw ValidationError(source_name + ": missing header row");
    check_linkage(set);
    return set;
}

ControlSet load_controls(const std::filesystem::path& path, ControlFormat /*format*/) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open control file: " + path.string());
    auto set = parse_controls(in, path.string());
    set.scope.analysis = path.stem().string();
    return set;
}

void write_controls(std::ostream& out, const ControlSet& set) {
    out << kControlCsvHeader << '\n';
    for (const auto& r : set.records) {
        out << r.database_id << ',' << r.target_id << ',' << r.comparator_id << ',' << r.outcome_id << ','
            << r.family_id << ',' << (r.true_effect_size ? format_double(*r.true_effect_size) : std::string()) << ','
            << format_double(r.log_estimate) << ',' << format_double(r.se_log_estimate) << '\n';
    }
}

void write_controls(const std::filesystem::path& path, const ControlSet& set, const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    if (!header_comment.empty()) out << header_comment << '\n';
    write_controls(out, set);
    if (!out) throw IoError("write failed: " + path.string());
}

namespace {

std::vector<std::string> shuffled_families(const ControlSet& set, std::uint64_t seed) {
    auto families = set.families();
    std::sort(families.begin(), families.end());
    std::mt19937_64 rng(seed);
    std::shuffle(families.begin(), families.end(), rng);
    return families;
}

}  // namespace

SplitPlan split_by_family(const ControlSet& set, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("split fraction must lie in (0, 1)");
    auto families = shuffled_families(set, seed);
    const auto n = families.size();
    if (n < 2) throw ValidationError("split needs at least 2 families, found " + std::to_string(n));
    auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

    SplitPlan plan;
    plan.fraction = fraction;
    plan.seed = seed;
    plan.train_families.insert(families.begin(), families.begin() + static_cast<std::ptrdiff_t>(n_train));
    plan.test_families.insert(families.begin() + static_cast<std::ptrdiff_t>(n_train), families.end());
    return plan;
}

std::vector<SplitPlan> rotate_by_family(const ControlSet& set, std::size_t folds, std::uint64_t seed) {
    auto families = shuffled_families(set, seed);
    const auto n = families.size();
    if (folds < 2) throw UsageError("rotation needs at least 2 folds");
    if (n < folds) throw ValidationError("fewer families than folds");
    std::vector<SplitPlan> plans(folds);
    for (std::size_t k = 0; k < folds; ++k) {
        const std::size_t lo = k * n / folds;
        const std::size_t hi = (k + 1) * n / folds;
        auto& plan = plans[k];
        plan.seed = seed;
        plan.fraction = 1.0 - 1.0 / static_cast<double>(folds);
        for (std::size_t i = 0; i < n; ++i)
            (i >= lo && i < hi ? plan.test_families : plan.train_families).insert(families[i]);
    }
    return plans;
}

ControlSet select_families(const ControlSet& set, const std::set<std::string>& families) {
    ControlSet out;
    out.scope = set.scope;
    for (const auto& r : set.records)
        if (families.count(r.family_id)) out.records.push_back(r);
    return out;
}

ControlSet filter_negative_only(const ControlSet& set) {
    ControlSet out;
    out.scope = set.scope;
    for (const auto& r : set.records)
        if (r.is_negative_control()) out.records.push_back(r);
    if (out.empty()) throw ValidationError("control set contains no negative controls");
    return out;
}

ControlSet filter_controls(const ControlSet& set) {
    ControlSet out;
    out.scope = set.scope;
    for (const auto& r : set.records)
        if (r.is_control()) out.records.push_back(r);
    return out;
}

}  // namespace empcal
