#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fairhedge::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,         ///< unreadable or invalid model, bad flags, bad generator or grid
  kValidationFailure = 3,  ///< singular systems, oracle disagreement, failed derivative check
  kInternalError = 4,
};

/// Runs the command line `args` (without the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fairhedge::cli
