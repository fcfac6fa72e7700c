#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace neuron_margins::csv {

struct Row {
    std::size_t line = 0;  // 1-based line number in the source file
    std::vector<std::string> cells;
};

// Comma-separated, UTF-8, '.' radix point. Lines starting with '#' are
// comments. Double-quoted cells may contain commas and doubled quotes.
struct Table {
    std::string path;
    Row header;
    std::vector<Row> rows;
};

Table read_file(const std::filesystem::path& path);

// Writes one CSV line; cells containing comma/quote/newline get quoted.
std::string join_row(const std::vector<std::string>& cells);

void write_file(const std::filesystem::path& path, const std::string& content);

// Locale-independent double parsing; throws ParseError with path/line on
// failure (non-numeric, trailing garbage, empty cell).
double parse_double(std::string_view cell, const std::string& path, std::size_t line);
long long parse_int(std::string_view cell, const std::string& path, std::size_t line);

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double value);

}  // namespace neuron_margins::csv
