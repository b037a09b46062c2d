#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pitchrl::cli {

// Exit codes: 0 all artifacts written, 1 runtime failure (including any
// failed run of a sweep), 2 usage or configuration error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

int run_cli(int argc, char** argv);
/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pitchrl::cli
