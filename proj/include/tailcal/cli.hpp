#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tailcal::cli {

enum ExitCode : int { kOk = 0, kUserError = 1, kNumericalError = 2 };

/// Runs one subcommand (synth, fit-pareto, calibrate, adjust, indicators,
/// bootstrap). `args` excludes the program name. Diagnostics and logs go
/// to `err`, help text to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace tailcal::cli
