#include "empcal/text_io.hpp"

#include <array>
#include <charconv>
#include <fstream>

#include "empcal/error.hpp"
#include "empcal/version.hpp"

namespace empcal {

std::string format_double(double value) {
    std::array<char, 64> buffer{};
    auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
    if (ec != std::errc{}) throw NumericalError("cannot format value");
    return {buffer.data(), end};
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

double parse_double(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        throw ValidationError("not a number: '" + std::string(text) + "'");
    return value;
}

std::uint64_t parse_u64(std::string_view text) {
    text = trim(text);
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        throw ValidationError("not an unsigned integer: '" + std::string(text) + "'");
    return value;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.emplace_back(trim(line.substr(start)));
            break;
        }
        fields.emplace_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

std::string provenance_line(const std::string& subcommand, std::uint64_t seed) {
    return std::string("# empcal ") + kVersion + " subcommand=" + subcommand + " seed=" + std::to_string(seed);
}

void write_key_values(const std::filesystem::path& path, const KeyValues& values,
                      const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    if (!header_comment.empty()) out << header_comment << '\n';
    for (const auto& [key, value] : values) out << key << ": " << value << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

KeyValues read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    KeyValues values;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = trim(line);
        if (view.empty() || view.front() == '#') continue;
        const auto colon = view.find(':');
        if (colon == std::string_view::npos)
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected 'key: value'");
        values[std::string(trim(view.substr(0, colon)))] = std::string(trim(view.substr(colon + 1)));
    }
    return values;
}

double require_double(const KeyValues& values, const std::string& key) {
    auto it = values.find(key);
    if (it == values.end()) throw ValidationError("missing key '" + key + "'");
    return parse_double(it->second);
}

}  // namespace empcal
