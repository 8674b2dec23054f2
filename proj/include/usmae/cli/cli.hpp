#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace usmae::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitError = 2;

// Entry point of the `usmae` tool; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace usmae::cli
