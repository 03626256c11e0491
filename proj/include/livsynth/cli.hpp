#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace livsynth {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs the command line `args` (without the program name). Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace livsynth
