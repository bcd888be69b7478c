#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tempo::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kValidationFailure = 1;
inline constexpr int kUsageError = 2;

/// Runs one command. `args` excludes the program name. Reports go to `out`;
/// the resolved-config log line and JSON errors go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tempo::cli
