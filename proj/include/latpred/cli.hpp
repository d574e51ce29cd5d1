#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace latpred {

enum ExitCode : int {
  kExitOk = 0,
  kExitBadArgs = 2,
  kExitDataError = 3,
  kExitNumerical = 4,
};

/// Entry point for the `latpred` tool. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace latpred
