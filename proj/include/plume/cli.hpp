#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "plume/tensor.hpp"

namespace plume::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2 };

/// Runs one command line (without the program name). Diagnostics go to `err`,
/// reports and help text to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Deterministic n x n test image in [0, 1]: a Gaussian release carried by
/// a uniform wind and spread by diffusion, evaluated with the periodic
/// spectral solver.
Tensor synthetic_plume(int n);

}  // namespace plume::cli
