#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace deformreg::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kDataError = 2, kNumericalFailure = 3 };

// Entry point of the `deformreg` tool. Progress goes to `out`, usage text and
// diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace deformreg::cli
