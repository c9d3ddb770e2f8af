#pragma once

#include <iosfwd>

namespace iterfilt::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitIo = 4,
};

/// Parses the command line, reads ITERFILT_THREADS, runs one subcommand and
/// returns the process exit code. Diagnostics go to `err`, a short summary
/// to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace iterfilt::cli
