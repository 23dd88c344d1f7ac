#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "plume/tape.hpp"

namespace plume::analysis {

inline constexpr double kStep = 1e-3;
inline constexpr double kTolerance = 1e-3;
inline constexpr int kMaxCoordinates = 64;
inline constexpr int kErfSamples = 8;

/// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
/// Throws std::invalid_argument for h <= 0 and std::domain_error if f is not
/// finite at any probe.
std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> theta, double h = kStep);
double finite_diff(const std::function<double(double)>& f, double x, double h = kStep);

struct GradCheckEntry {
  std::string name;       // leaf name
  std::size_t index = 0;  // flat coordinate within the leaf
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::string target;
  double h = kStep;
  double tolerance = kTolerance;
  std::vector<GradCheckEntry> entries;

  std::size_t failures() const;
  bool passed() const { return failures() == 0; }
  double max_rel_error() const;
  void append(const GradCheckReport& other);
};

struct GradCheckOptions {
  double h = kStep;
  double tolerance = kTolerance;
  int max_coordinates = kMaxCoordinates;
  std::uint64_t seed = 0;
};

/// Checks d<c, outputs>/d(param) against central differences for every
/// coordinate of each param leaf (or a seeded subsample for large leaves).
/// The probe c is a seeded standard-normal tensor per output. Leaves are
/// perturbed in place and the tape replayed; original values are restored.
GradCheckReport grad_check(Tape<double>& tape, const std::vector<Var<double>>& outputs,
                           const std::vector<Var<double>>& params, const GradCheckOptions& opt = {},
                           const std::string& target = {});

/// A network on a double tape whose output is spatially aligned with its
/// input. Parameters are fixed when the network is made.
struct ErfNetwork {
  std::string description;
  int channels = 1;
  std::function<Var<double>(Var<double>)> forward;
};

ErfNetwork dwconv_network(int channels, std::uint64_t seed, int depth = 1);
/// Gas block with an all-zero edge prior.
ErfNetwork gasblock_network(int channels, std::uint64_t seed, double alpha_decay);

struct ErfMap {
  std::string description;
  int height = 0;
  int width = 0;
  std::vector<double> values;  // height x width, max 1 unless all zero

  double at(int h, int w) const { return values[static_cast<std::size_t>(h) * width + w]; }
};

/// Channel-summed |d(sum_c out[c, H/2, W/2]) / d input| averaged over
/// `samples` seeded standard-normal inputs, normalized by its maximum.
ErfMap erf_map(const ErfNetwork& net, int height, int width, std::uint64_t seed,
               int samples = kErfSamples);

/// Smallest fraction of pixels whose sorted mass reaches t of the total.
/// Requires t in (0, 1) and a map that is not all zero.
double contribution_ratio(const ErfMap& erf, double t);

}  // namespace plume::analysis
