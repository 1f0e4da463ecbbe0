#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace decodewin {

/// Exit codes shared by every command.
enum ExitCode : int { kExitOk = 0, kExitCompute = 1, kExitUsage = 2 };

/// Runs one command line (without the program name). Commands:
/// synth, curve, normalize, peaks, compare, validate, replay.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace decodewin
