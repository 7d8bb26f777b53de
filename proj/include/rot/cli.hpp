#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace rot::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitConvergence = 4;
inline constexpr int kExitNumerical = 5;

inline constexpr std::string_view kVersion = "0.1.0";

/// Runs one subcommand. `args` excludes the program name. Results go to files
/// under --out; the result JSON is echoed to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rot::cli
