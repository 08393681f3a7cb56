#include "koopdrive/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "koopdrive/error.hpp"

namespace koopdrive::io {

std::string format_double(double value) {
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc{}) {
        throw NumericalError("cannot format floating-point value");
    }
    return std::string(buffer, end);
}

double parse_double(std::string_view field, std::string_view context) {
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
        field.remove_suffix(1);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
        throw ValidationError(std::string(context) + ": cannot parse number '" + std::string(field) + "'");
    }
    return value;
}

double snap_period(double period) {
    if (!(period > 0.0) || !std::isfinite(period)) return period;
    // Dividing by an exact power of ten keeps the result correctly rounded.
    const int digits = 11 - static_cast<int>(std::floor(std::log10(period)));
    if (digits < 0 || digits > 22) return period;
    const double power = std::pow(10.0, digits);
    return std::round(period * power) / power;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw IoError("file not found: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write file: " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw IoError("write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename temp file onto " + path.string());
    }
}

std::vector<std::string> split(std::string_view text, char delimiter) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        auto pos = text.find(delimiter, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(text.substr(start));
            break;
        }
        parts.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return parts;
}

CsvTable parse_numeric_csv(std::string_view text, std::string_view context) {
    CsvTable table;
    std::size_t line_no = 0;
    bool have_header = false;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        auto fields = split(line, ',');
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw ValidationError(std::string(context) + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(table.header.size()) + " fields, found " +
                                  std::to_string(fields.size()));
        }
        std::vector<double> row;
        row.reserve(fields.size());
        const std::string where = std::string(context) + ":" + std::to_string(line_no);
        for (const auto& f : fields) row.push_back(parse_double(f, where));
        table.rows.push_back(std::move(row));
        if (end == text.size()) break;
    }
    if (!have_header) {
        throw ValidationError(std::string(context) + ": empty CSV");
    }
    return table;
}

CsvTable read_numeric_csv(const std::filesystem::path& path) {
    return parse_numeric_csv(read_text_file(path), path.string());
}

}  // namespace koopdrive::io
