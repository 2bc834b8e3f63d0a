#pragma once

#include <ostream>

namespace ftpeval {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitBackendFailure = 3,
  kExitDatasetError = 4,
};

// Entry point of the `ftpeval` command. Reports go to `out` unless --out is
// given; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ftpeval
