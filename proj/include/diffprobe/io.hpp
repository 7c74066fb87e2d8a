#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace diffprobe {

/// Shortest text that round-trips to the same double.
std::string format_double(double value);

/// Fixed-point with `decimals` digits after the point.
std::string format_fixed(double value, int decimals);

/// Locale-independent parsing ('.' decimal separator); throws on junk.
double parse_double(std::string_view text, std::string_view what);
std::int64_t parse_int(std::string_view text, std::string_view what);

/// Splits one CSV record on commas. Quoting is not supported.
std::vector<std::string> split_csv_line(std::string_view line);

/// Reads lines, dropping a trailing '\r' and skipping blank lines.
std::vector<std::string> read_lines(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so
/// readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace diffprobe

namespace diffprobe {

/// Replaces a leading ASCII hyphen with U+2212 for human-readable summaries.
std::string typographic_minus(std::string text);

}  // namespace diffprobe
