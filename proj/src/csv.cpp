#include "neuron_margins/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

#include "neuron_margins/common.hpp"

namespace neuron_margins::csv {

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& path,
                                    std::size_t lineno) {
    std::vector<std::string> cells;
    std::string cur;
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '"') {
            if (in_quote && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else {
                in_quote = !in_quote;
            }
            continue;
        }
        if (c == ',' && !in_quote) {
            cells.push_back(cur);
            cur.clear();
            continue;
        }
        cur.push_back(c);
    }
    if (in_quote) throw ParseError(path, lineno, "unterminated quote");
    cells.push_back(cur);
    return cells;
}

}  // namespace

Table read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");

    Table table;
    table.path = path.string();
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') continue;
        Row row;
        row.line = lineno;
        row.cells = split_line(line, table.path, lineno);
        if (!have_header) {
            table.header = std::move(row);
            have_header = true;
        } else {
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

std::string join_row(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out.push_back(',');
        const std::string& c = cells[i];
        if (c.find_first_of(",\"\n") != std::string::npos) {
            out.push_back('"');
            for (char ch : c) {
                if (ch == '"') out += "\"\"";
                else out.push_back(ch);
            }
            out.push_back('"');
        } else {
            out += c;
        }
    }
    out.push_back('\n');
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << content;
    if (!out) throw ValidationError("write failed for " + path.string());
}

double parse_double(std::string_view cell, const std::string& path, std::size_t line) {
    // tolerate surrounding spaces
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
    if (cell.empty()) throw ParseError(path, line, "empty numeric cell");
    double value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
        throw ParseError(path, line, "not a number: \"" + std::string(cell) + "\"");
    return value;
}

long long parse_int(std::string_view cell, const std::string& path, std::size_t line) {
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
    if (cell.empty()) throw ParseError(path, line, "empty integer cell");
    long long value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
        throw ParseError(path, line, "not an integer: \"" + std::string(cell) + "\"");
    return value;
}

std::string format_double(double value) {
    char buf[64];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, value);
        double back = 0;
        auto [ptr, ec] = std::from_chars(buf, buf + std::char_traits<char>::length(buf), back);
        (void)ptr;
        if (ec == std::errc{} && back == value) break;
    }
    return buf;
}

}  // namespace neuron_margins::csv
