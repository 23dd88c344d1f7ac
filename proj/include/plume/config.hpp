#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace plume {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Run settings read from "key=value" lines. Blank lines and lines starting
/// with '#' are ignored; unknown or repeated keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  double alpha_fusion_init = 0.7;
  double alpha_decay_init = 0.5;
  int pyramid_levels = 3;
  int gabor_scales = 3;
  std::vector<int> directions{0, 45, 90, 135};

  void validate() const;
  std::string str() const;

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::string& path);
};

}  // namespace plume
