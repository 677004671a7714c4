#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace oulab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitCheckFailed = 2;

/// Entry point of the command-line tool.  `args` excludes the program name.
/// Reports go to `out` unless --output names a file; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oulab
