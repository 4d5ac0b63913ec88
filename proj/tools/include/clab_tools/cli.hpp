#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace clab::tools {

// Exit codes.
inline constexpr int kExitPass = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

// args excludes the program name. Prints a one-line summary to out (unless
// --quiet) and diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace clab::tools
