#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace onebit {

/// 17-significant-digit serialization (round-trips any double exactly).
std::string format_g17(double v);

/// Shortest representation that round-trips exactly; used for config echo.
std::string format_shortest(double v);

double parse_double(const std::string& text);
long parse_long(const std::string& text);

/// Splits one CSV line on commas (no quoting; our schemas never need it).
std::vector<std::string> split_csv_line(const std::string& line);

void write_file(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace onebit
