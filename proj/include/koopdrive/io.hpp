#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace koopdrive::io {

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

// Parses a full decimal field; throws ValidationError on garbage.
double parse_double(std::string_view field, std::string_view context);

// Rounds a sample period inferred from time stamps to 12 significant
// digits, so 0.025 read back from a CSV is exactly the double 0.025.
double snap_period(double period);

std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames over the destination.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

// Numeric CSV with a single header line. Blank lines are skipped.
CsvTable parse_numeric_csv(std::string_view text, std::string_view context);
CsvTable read_numeric_csv(const std::filesystem::path& path);

std::vector<std::string> split(std::string_view text, char delimiter);

}  // namespace koopdrive::io
