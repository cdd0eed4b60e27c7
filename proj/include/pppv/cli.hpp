#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pppv {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,        // unknown flag or invalid flag combination
  kExitIngestion = 3,    // input file missing, malformed or invalid
  kExitModel = 4,        // model fit or statistic failed on the data
  kExitReliability = 5,  // too many failed resamples or replications
};

/// Runs one CLI invocation. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pppv
