#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace lectio {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace lectio
