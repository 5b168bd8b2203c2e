#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lectio::detail {

// RFC 4180 quoting, applied only when the field needs it.
std::string csv_field(std::string_view value);
std::string csv_row(const std::vector<std::string>& fields);

// Parses a whole CSV document; quoted fields may contain newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text,
                                                const std::filesystem::path& source);

}  // namespace lectio::detail
