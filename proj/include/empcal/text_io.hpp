#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace empcal {

// Shortest representation that parses back to the same double.
std::string format_double(double value);

double parse_double(std::string_view text);
std::uint64_t parse_u64(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);

// "# empcal <version> subcommand=<name> seed=<seed>"
std::string provenance_line(const std::string& subcommand, std::uint64_t seed);

// Flat "key: value" files used for fitted model parameters.
using KeyValues = std::map<std::string, std::string>;

void write_key_values(const std::filesystem::path& path, const KeyValues& values,
                      const std::string& header_comment);
KeyValues read_key_values(const std::filesystem::path& path);

double require_double(const KeyValues& values, const std::string& key);

}  // namespace empcal
