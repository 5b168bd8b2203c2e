#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lectio::cli {

// Exit codes: 0 success, 1 failure, 2 usage error, 3 coverage error.
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitCoverage = 3;

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lectio::cli
