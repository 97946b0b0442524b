#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmcl {

// Shortest text that round-trips a double exactly (at most 17 significant digits).
std::string format_real(double v);
std::string join_reals(std::span<const double> values);

std::vector<std::string> split_csv(std::string_view line, char sep = ',');
std::string trim(std::string_view s);

// Lines without their terminators; a trailing '\r' is stripped.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

// Strict parsers. Throw ParseError naming the file and line on failure.
double parse_real(std::string_view field, const std::string& file, std::size_t line);
std::size_t parse_size(std::string_view field, const std::string& file, std::size_t line);
long long parse_int(std::string_view field, const std::string& file, std::size_t line);

}  // namespace mmcl
