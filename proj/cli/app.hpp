#pragma once

#include <string>
#include <vector>

namespace plsinet::cli {

enum ExitCode : int {
    kOk = 0,
    kArgumentError = 2,
    kDataError = 3,
    kDivergence = 4,
    kInferenceFailure = 5,
};

/// Runs the command line `args` (program name excluded) and returns the exit
/// status. `allow_env_seed = false` ignores PLSI_SEED (used by replay).
int run(const std::vector<std::string>& args, bool allow_env_seed = true);

} // namespace plsinet::cli
