#pragma once

// Comma-separated tables with a header row, and strict field parsing with
// row-anchored messages.

#include <stdexcept>
#include <string>
#include <vector>

namespace heapsae {

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    /// File line of each row; blank lines are skipped on reading.
    std::vector<std::size_t> row_lines;

    std::size_t line(std::size_t row) const { return row < row_lines.size() ? row_lines[row] : row + 2; }

    /// Index of a column; throws DataError naming the file when absent.
    std::size_t require(const std::string& name, const std::string& source) const;
    /// Index of a column or npos.
    std::size_t find(const std::string& name) const;
};

Table read_table(const std::string& path);
/// Writes through a temporary file and renames it into place.
void write_table(const std::string& path, const Table& table);
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double v);
double parse_double(const std::string& field, const std::string& source, std::size_t line,
                    const std::string& column);
int parse_int(const std::string& field, const std::string& source, std::size_t line, const std::string& column);

}  // namespace heapsae
