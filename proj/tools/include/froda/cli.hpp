#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace froda::cli {

/// Exit codes of the froda tool.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;  ///< runtime or validation failure
inline constexpr int kUsage = 2;    ///< malformed command line

/// Runs one command line (without the program name) and returns its exit
/// code. Normal output goes to `out`, diagnostics to `err`; errors are a
/// single line starting with "error: ".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace froda::cli
