#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace modslam {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;  // I/O, data, tracking and stage failures
inline constexpr int kExitUsage = 2;    // bad flags or configuration

/// Runs one subcommand. args excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace modslam
