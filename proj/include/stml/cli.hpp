#pragma once

#include <string>
#include <vector>

namespace stml {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes of the `stml` executable.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitNumerical = 2 };

/// Entry point of the `stml` command line; args exclude the program name.
int run_cli(const std::vector<std::string>& args);

/// Header row of metrics.csv.
const char* metrics_header();

}  // namespace stml
