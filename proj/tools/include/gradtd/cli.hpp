#pragma once

#include <iosfwd>

namespace gradtd::cli {

enum ExitCode : int {
  kSuccess = 0,
  kValidationError = 1,
  kAcceptanceFailure = 2,
};

/// Parses argv, validates the effective configuration, and runs the selected
/// subcommand (run, replicate, bellman, oracle, verify).
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gradtd::cli
