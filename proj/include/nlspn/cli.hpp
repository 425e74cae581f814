#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nlspn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one CLI invocation; argv[0] is the program name. Returns the exit
/// code (0 ok, 1 runtime failure, 2 usage error).
int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace nlspn
