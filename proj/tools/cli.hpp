#pragma once

#include <string>
#include <vector>

namespace fshapes::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes.
enum Exit : int { Ok = 0, Validation = 2, Numerical = 3, Io = 4 };

/// Runs the command line; never throws.
int run(const std::vector<std::string>& args);

/// `--help` of the tool followed by the help of every subcommand.
std::string help_text();

}  // namespace fshapes::cli
