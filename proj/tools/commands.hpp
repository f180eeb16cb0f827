#pragma once

#include <iosfwd>

namespace excursion::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kSuccess = 0,
  kValidation = 1,
  kNumerical = 2,
  kPropertyFailure = 3,
};

/// Parses argv and runs one subcommand. CSV goes to `out` (or --out),
/// diagnostics to `err`. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace excursion::cli
