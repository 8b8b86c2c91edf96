#pragma once

#include <iosfwd>
#include <string_view>

namespace qtele::cli {

inline constexpr std::string_view kToolName = "qtele";

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

/// Entry point of the command-line tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qtele::cli
