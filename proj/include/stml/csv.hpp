#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stml {

/// Shortest form is not required; 17 significant digits always round-trip an f64.
std::string format_double(double value);

/// Parses a full token as a double; throws ParseError (with `line`) otherwise.
double parse_double(std::string_view token, std::size_t line);
long long parse_integer(std::string_view token, std::size_t line);

std::vector<std::string_view> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

/// Writes to `path.tmp` and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace stml
