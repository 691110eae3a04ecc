#pragma once

#include <filesystem>
#include <string>

namespace robscat {

/// Hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& data);

/// Hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace robscat
