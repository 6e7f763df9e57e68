#include "heapsae/tables.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace heapsae {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(field);
            field.clear();
        } else if (ch != '\r') {
            field += ch;
        }
    }
    out.push_back(field);
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::string where(const std::string& source, std::size_t line, const std::string& column) {
    return source + ":" + std::to_string(line) + ": column '" + column + "'";
}

}  // namespace

std::size_t Table::find(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) {
            return i;
        }
    }
    return std::string::npos;
}

std::size_t Table::require(const std::string& name, const std::string& source) const {
    const std::size_t i = find(name);
    if (i == std::string::npos) {
        throw DataError(source + ": missing required column '" + name + "'");
    }
    return i;
}

Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(path + ": cannot open file");
    }
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_line(line);
        for (auto& f : fields) {
            f = trim(f);
        }
        if (t.columns.empty()) {
            t.columns = std::move(fields);
            continue;
        }
        if (fields.size() != t.columns.size()) {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) +
                            " fields, found " + std::to_string(fields.size()));
        }
        t.rows.push_back(std::move(fields));
        t.row_lines.push_back(lineno);
    }
    if (t.columns.empty()) {
        throw DataError(path + ": file is empty");
    }
    return t;
}

void write_text(const std::string& path, const std::string& text) {
    const std::filesystem::path target(path);
    if (target.has_parent_path()) {
        std::filesystem::create_directories(target.parent_path());
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError(path + ": cannot open for writing");
        }
        out << text;
        if (!out) {
            throw DataError(path + ": write failed");
        }
    }
    std::filesystem::rename(tmp, target);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(path + ": cannot open file");
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_table(const std::string& path, const Table& table) {
    std::string text;
    auto append_row = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) {
                text += ',';
            }
            text += row[i];
        }
        text += '\n';
    };
    append_row(table.columns);
    for (const auto& r : table.rows) {
        append_row(r);
    }
    write_text(path, text);
}

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "NA";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& field, const std::string& source, std::size_t line,
                    const std::string& column) {
    if (field == "NA") {
        return std::nan("");
    }
    if (field == "inf") {
        return INFINITY;
    }
    if (field == "-inf") {
        return -INFINITY;
    }
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size() || field.empty()) {
        throw DataError(where(source, line, column) + ": '" + field + "' is not a number");
    }
    return v;
}

int parse_int(const std::string& field, const std::string& source, std::size_t line, const std::string& column) {
    int v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size() || field.empty()) {
        throw DataError(where(source, line, column) + ": '" + field + "' is not an integer");
    }
    return v;
}

}  // namespace heapsae
