#pragma once

// File and hashing helpers shared by the loaders.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace moralkb {

/// Throws DataError if the file cannot be read.
std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames it into place, so readers
/// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Calls `fn(line_number, line)` for every non-blank line. Line numbers are
/// 1-based; a trailing '\r' is stripped.
void for_each_line(std::string_view text,
                   const std::function<void(std::size_t, std::string_view)>& fn);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Shortest round-trippable decimal form of a double.
std::string format_double(double v);

}  // namespace moralkb
