#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage or configuration
// error, 2 data validation error, 3 numerical failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace heapsae::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace heapsae::cli
