#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace agrsst::cli {

inline constexpr std::string_view kVersion = "0.1.0";

/// Runs one command line (without the program name). Returns the exit code:
/// 0 ok, 2 usage or input error, 3 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Manifest written beside an output file.
std::string manifest_path(const std::string& output);

/// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::string& path);

} // namespace agrsst::cli
