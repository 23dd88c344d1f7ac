#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plume/analysis.hpp"
#include "plume/spectral.hpp"

// Canned checks shared by the command-line tool and the test programs.
namespace plume::suites {

/// gasblock, agpeo, ie, aimm.
const std::vector<std::string>& gradcheck_targets();

/// Seeded double-precision gradient check of one target (or "all") on 8x8
/// inputs with two channels, four for the gas block (its channel norm is
/// nearly a step at two channels, too sharp for the default step). Throws
/// std::invalid_argument for an unknown target.
analysis::GradCheckReport gradcheck(const std::string& target, std::uint64_t seed,
                                    const analysis::GradCheckOptions& opt = {});

struct OracleResult {
  int size = 0;
  int steps = 0;
  double dt = 0.0;  // step actually used, t / steps
  double rel_l2 = 0.0;
  double max_abs = 0.0;
  double imag_residue = 0.0;
};

/// Periodic spectral solution vs explicit finite-difference rollout on a
/// centered Gaussian with sigma = 3n/32. The stability bound is checked on
/// the requested dt; the rollout uses ceil(t/dt) equal steps.
OracleResult physics_oracle(int n, const spectral::DiffusionParams& p, double dt,
                            spectral::Boundary boundary = spectral::Boundary::periodic);

}  // namespace plume::suites
