#include "plume/config.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "plume/io.hpp"

namespace plume {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || v.empty())
    throw ConfigError("config: bad value '" + std::string(v) + "' for " + std::string(key));
  return out;
}

std::vector<int> parse_directions(std::string_view v) {
  std::vector<int> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_number<int>("directions", trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  if (!(alpha_fusion_init > 0.0 && alpha_fusion_init < 1.0))
    throw ConfigError("config: alpha_fusion_init must lie in (0, 1)");
  if (!(alpha_decay_init >= 0.0)) throw ConfigError("config: alpha_decay_init must be >= 0");
  if (pyramid_levels < 0 || pyramid_levels > 16) throw ConfigError("config: pyramid_levels must lie in [0, 16]");
  if (gabor_scales < 1 || gabor_scales > 8) throw ConfigError("config: gabor_scales must lie in [1, 8]");
  if (directions.empty()) throw ConfigError("config: directions must not be empty");
  std::set<int> seen;
  for (int d : directions) {
    if (d != 0 && d != 45 && d != 90 && d != 135)
      throw ConfigError("config: direction " + std::to_string(d) + " not in {0,45,90,135}");
    if (!seen.insert(d).second) throw ConfigError("config: direction " + std::to_string(d) + " repeated");
  }
}

std::string RunConfig::str() const {
  std::ostringstream ss;
  ss << "seed=" << seed << "\nalpha_fusion_init=" << io::format_real(alpha_fusion_init)
     << "\nalpha_decay_init=" << io::format_real(alpha_decay_init) << "\npyramid_levels=" << pyramid_levels
     << "\ngabor_scales=" << gabor_scales << "\ndirections=";
  for (std::size_t i = 0; i < directions.size(); ++i) ss << (i ? "," : "") << directions[i];
  ss << "\n";
  return ss.str();
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::set<std::string> keys;
  int lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!keys.insert(key).second) throw ConfigError("config: key '" + key + "' repeated");
    if (key == "seed")
      cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "alpha_fusion_init")
      cfg.alpha_fusion_init = parse_number<double>(key, value);
    else if (key == "alpha_decay_init")
      cfg.alpha_decay_init = parse_number<double>(key, value);
    else if (key == "pyramid_levels")
      cfg.pyramid_levels = parse_number<int>(key, value);
    else if (key == "gabor_scales")
      cfg.gabor_scales = parse_number<int>(key, value);
    else if (key == "directions")
      cfg.directions = parse_directions(value);
    else
      throw ConfigError("config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) { return parse(io::read_file(path)); }

}  // namespace plume
