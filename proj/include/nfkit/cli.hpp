#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nfkit {

// Exit statuses of the command line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitMissingStage = 3,
  kExitAuth = 4,
  kExitLocked = 5,
};

// Runs the command line tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nfkit
