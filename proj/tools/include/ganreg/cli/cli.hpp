#pragma once

#include <iosfwd>

namespace ganreg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitDiverged = 2;
inline constexpr int kExitCheckFailed = 3;

/// Entry point of the `ganreg` tool: train, verify, cross-test, sample.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ganreg::cli
