#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mpct {

inline constexpr int kExitOk = 0;
inline constexpr int kExitMonitorFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericFailure = 3;

struct CliOptions {
  std::string command;  // analyze | sets | simulate | sweep-gamma | compare
  std::string config_path;
  std::string out_dir = "out";
  std::string ingredients_path;  // reuse a sets cache instead of recomputing
  bool strict = false;
  std::optional<unsigned> seed;
  std::vector<std::string> tol_overrides;  // KEY=VAL
};

/// Runs one command, writing artifacts under out_dir. Returns the process exit code;
/// progress goes to log and diagnostics to err.
int run_command(const CliOptions& opts, std::ostream& log, std::ostream& err);

}  // namespace mpct
