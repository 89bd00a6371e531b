#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lseg::cli {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kUnreadablePath = 3,
  kInvalidConfig = 4,
  kDataError = 5,
  kCheckpointError = 6,
};

/// Runs the `lseg` command line. Errors are reported on `err` as a single
/// line `error: <code>: <message>`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lseg::cli
