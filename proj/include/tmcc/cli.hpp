#pragma once

#include <string>
#include <vector>

namespace tmcc::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kConfigError = 2,
    kValidationError = 3,
    kSolverAbort = 4,
};

/// Entry point of the tmcc executable. args excludes the program name.
int run(const std::vector<std::string>& args);

}  // namespace tmcc::cli
