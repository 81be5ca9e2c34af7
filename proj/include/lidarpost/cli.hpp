#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace lidarpost {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitInput = 3,
};

/// Entry point of the `lidarpost` tool. `args` excludes the program name.
/// Summaries and reports go to `out`; failures print a single
/// "ERROR <code>: <message>" line to `err`.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace lidarpost
