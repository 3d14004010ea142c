#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "codegrag/error.hpp"

namespace codegrag::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitExtraction = 4,
  kExitEncoder = 5,
  kExitLlm = 6,
  kExitSandbox = 7,
};

int exit_code_for(ErrorCode code);

/// Runs one subcommand. Results go to `out`, structured log records and
/// errors (one JSON object per line) go to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace codegrag::cli
