#pragma once

#include <iosfwd>

namespace gridflex::cli {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int {
    kOk = 0,
    kUsageOrConfig = 2,
    kNumericalAbort = 3,
    kExcitation = 4,
};

/// Entry point behind the gridflex executable; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gridflex::cli
