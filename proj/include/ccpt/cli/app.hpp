#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ccpt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;  // bad flags, config, map or demo files
inline constexpr int kExitRuntime = 3;     // failures after validation passed

// Environment variable naming the default output root.
inline constexpr const char* kOutRootEnv = "CCPT_OUT_ROOT";

// Runs the command line `args` (without the program name) and returns the
// exit code. Normal output goes to `out`, diagnostics and progress to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ccpt::cli
