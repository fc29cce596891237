#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kpzss::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // invariant or tolerance failure
inline constexpr int kExitUsage = 2;

inline constexpr int kSchemaVersion = 1;
inline constexpr std::size_t kMaxSweepCells = 10000;

// Runs `kpz-selfsim <args...>` in process. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kpzss::cli
