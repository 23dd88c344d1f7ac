#include "plume/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <optional>

#include "plume/analysis.hpp"
#include "plume/config.hpp"
#include "plume/edge.hpp"
#include "plume/gas_block.hpp"
#include "plume/io.hpp"
#include "plume/routing.hpp"
#include "plume/spectral.hpp"
#include "plume/suites.hpp"

namespace plume::cli {

namespace {

constexpr const char* kWeightsHeader = "seeded-random-untrained";

// Tensor inputs accept either format, told apart by the leading magic bytes.
Tensor load_tensor(const std::string& path) {
  const std::string bytes = io::read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return io::decode_pgm(bytes);
  return io::decode_tensor(bytes);
}

// Scale into [0, 1] for image output.
Tensor to_unit_range(const Tensor& t) {
  Tensor out = t;
  float m = 0.0f;
  for (float v : out.data()) m = std::max(m, std::fabs(v));
  if (m > 0.0f)
    for (auto& v : out.data()) v = std::fabs(v) / m;
  return out;
}

std::string strip_suffix(const std::string& s, const std::string& suffix) {
  if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0)
    return s.substr(0, s.size() - suffix.size());
  return s;
}

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;

  RunConfig config() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (seed_opt && seed_opt->count() > 0) cfg.seed = seed;
    return cfg;
  }
};

void add_config(CLI::App* sub, Common& c, bool with_seed) {
  sub->add_option("--config", c.config_path, "key=value run configuration file");
  if (with_seed) c.seed_opt = sub->add_option("--seed", c.seed, "parameter seed (default: config seed)");
}

edge::EdgeBanks<float> banks_for(const RunConfig& cfg) {
  return edge::EdgeBanks<float>{edge::DirectionalBank<float>::make(cfg.directions),
                                edge::GaborBank<float>::make(cfg.gabor_scales)};
}

// ---- edge -----------------------------------------------------------------

struct EdgeArgs {
  Common common;
  std::string in, out, out_tensor, alpha = "learned-init", component = "agpeo";
};

int run_edge(const EdgeArgs& a, std::ostream& out) {
  const RunConfig cfg = a.common.config();
  const Tensor x = load_tensor(a.in);
  const auto banks = banks_for(cfg);
  Tensor e;
  if (a.component == "agpeo") {
    if (a.alpha == "learned-init") {
      e = edge::agpeo(x, edge::AgpeoParams<float>::with_alpha(cfg.alpha_fusion_init), banks).e0;
    } else {
      double alpha = 0.0;
      try {
        std::size_t used = 0;
        alpha = std::stod(a.alpha, &used);
        if (used != a.alpha.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw std::invalid_argument("--alpha expects a number in [0, 1] or learned-init");
      }
      e = edge::agpeo_fixed(x, alpha, banks).e0;
    }
  } else if (a.component == "gradient") {
    Tape<float> tape;
    e = edge::normalize_by_max(edge::directional_gradient(tape.leaf(x), banks.directional), edge::kEps)
            .value();
  } else if (a.component == "phase") {
    e = edge::phase_congruency(x, banks.gabor);
  } else if (a.component == "sobel") {
    e = to_unit_range(edge::sobel_edge(x));
  } else {
    e = to_unit_range(edge::laplacian_edge(x));
  }
  io::write_pgm(e, a.out);
  if (!a.out_tensor.empty()) io::write_tensor(e, a.out_tensor);
  io::Report r;
  r.add("component", a.component);
  r.add("height", e.height());
  r.add("width", e.width());
  double mx = 0.0, mean = 0.0;
  for (float v : e.data()) {
    mx = std::max(mx, static_cast<double>(v));
    mean += v;
  }
  r.add("max", mx);
  r.add("mean", mean / static_cast<double>(e.size()));
  out << r.str();
  return kOk;
}

// ---- pyramid --------------------------------------------------------------

struct PyramidArgs {
  Common common;
  std::string in, prefix;
  int levels = edge::kDefaultPyramidLevels;
  CLI::Option* levels_opt = nullptr;
  int channels = 8;
};

int run_pyramid(const PyramidArgs& a, std::ostream& out) {
  const RunConfig cfg = a.common.config();
  const int levels = a.levels_opt->count() > 0 ? a.levels : cfg.pyramid_levels;
  if (levels < 0) throw std::invalid_argument("--levels must be >= 0");
  const Tensor x = load_tensor(a.in);
  const auto e0 = edge::agpeo(x, edge::AgpeoParams<float>::with_alpha(cfg.alpha_fusion_init), banks_for(cfg)).e0;
  Prng rng(cfg.seed);
  const auto params = edge::MsepmParams<float>::init(levels, e0.channels(), a.channels, rng);
  const auto pyr = edge::build_pyramid(e0, params);
  io::Report r;
  for (int i = 0; i <= levels; ++i) {
    io::write_pgm(pyr.levels[i], a.prefix + "E" + std::to_string(i) + ".pgm");
    io::write_tensor(pyr.projected[i], a.prefix + "P" + std::to_string(i) + ".gtsr");
    r.add("level" + std::to_string(i), pyr.levels[i].shape().str());
  }
  out << r.str();
  return kOk;
}

// ---- gasblock -------------------------------------------------------------

struct GasArgs {
  Common common;
  std::string in, edge, out, trace_prefix;
  double alpha_decay = gas::kDefaultAlphaDecay;
  CLI::Option* alpha_opt = nullptr;
};

int run_gasblock(const GasArgs& a, std::ostream& out) {
  const RunConfig cfg = a.common.config();
  const double alpha = a.alpha_opt->count() > 0 ? a.alpha_decay : cfg.alpha_decay_init;
  const Tensor x = load_tensor(a.in);
  const Tensor e = load_tensor(a.edge);
  Prng rng(cfg.seed);
  const auto params = gas::GasBlockParams<float>::init(x.channels(), e.channels(), rng, alpha);
  const auto t = gas::gas_block_forward(x, e, params);
  io::write_tensor(t.y, a.out);
  const std::string prefix =
      a.trace_prefix.empty() ? strip_suffix(a.out, ".gtsr") + "." : a.trace_prefix;
  const std::pair<const char*, const Tensor*> trace[] = {
      {"x_local", &t.x_local},   {"x_proj", &t.x_proj}, {"z", &t.z},          {"x_global_pre", &t.x_global_pre},
      {"gate", &t.gate},         {"x_global", &t.x_global}, {"y_pre", &t.y_pre}};
  io::Report r;
  r.add("weights", kWeightsHeader);
  r.add("alpha_decay", alpha);
  for (const auto& [name, tensor] : trace) {
    io::write_tensor(*tensor, prefix + name + ".gtsr");
    r.add(std::string("trace.") + name, prefix + name + ".gtsr");
  }
  r.add("output", a.out);
  out << r.str();
  return kOk;
}

// ---- importance -----------------------------------------------------------

struct ImportanceArgs {
  Common common;
  std::string in, out;
};

int run_importance(const ImportanceArgs& a, std::ostream& out) {
  const RunConfig cfg = a.common.config();
  const Tensor x = load_tensor(a.in);
  Prng rng(cfg.seed);
  const auto params = routing::ImportanceParams<float>::init(x.channels(), rng);
  const Tensor imap = routing::importance_map(x, params);
  io::write_tensor(imap, a.out);
  const auto w = routing::fusion_weights(params);
  io::Report r;
  r.add("weights", kWeightsHeader);
  r.add("w_global", w[0]);
  r.add("w_local", w[1]);
  r.add("w_diversity", w[2]);
  out << r.str();
  return kOk;
}

// ---- route ----------------------------------------------------------------

struct RouteArgs {
  Common common;
  std::string p3, p4, p5, prefix;
  std::vector<int> disabled;
};

int run_route(const RouteArgs& a, std::ostream& out) {
  const RunConfig cfg = a.common.config();
  const routing::FeaturePyramid<float> pyr{load_tensor(a.p3), load_tensor(a.p4), load_tensor(a.p5)};
  routing::check_pyramid(pyr.p3.shape(), pyr.p4.shape(), pyr.p5.shape());
  Prng rng(cfg.seed);
  auto params = routing::CasrParams<float>::init(pyr.p4.channels(), rng);
  for (int d : a.disabled) params.enabled.at(d - 1) = false;
  const auto res = routing::casr_pan_forward(pyr, params);
  io::write_tensor(res.out.p3, a.prefix + "P3.gtsr");
  io::write_tensor(res.out.p4, a.prefix + "P4.gtsr");
  io::write_tensor(res.out.p5, a.prefix + "P5.gtsr");
  io::write_tensor(res.importance, a.prefix + "importance.gtsr");
  io::Report r;
  r.add("weights", kWeightsHeader);
  const auto fw = routing::fusion_weights(params.importance);
  r.add("w_global", fw[0]);
  r.add("w_local", fw[1]);
  r.add("w_diversity", fw[2]);
  for (int i = 0; i < routing::kPaths; ++i) {
    const Tensor& w = res.weights[i];
    double mean = 0.0;
    for (float v : w.data()) mean += v;
    io::write_tensor(w, a.prefix + "W" + std::to_string(i + 1) + ".gtsr");
    r.add("path" + std::to_string(i + 1) + ".enabled", params.enabled[i] ? "1" : "0");
    r.add("path" + std::to_string(i + 1) + ".mean_weight", mean / static_cast<double>(w.size()));
  }
  r.write(a.prefix + "report.txt");
  out << r.str();
  return kOk;
}

// ---- oracle ---------------------------------------------------------------

struct OracleArgs {
  int size = 32;
  double d = 0.5, vx = 0.0, vy = 0.0, t = 1.0, dt = 0.01, tol = 2e-2;
  std::string boundary = "periodic", report;
};

int run_oracle(const OracleArgs& a, std::ostream& out, std::ostream& err) {
  spectral::DiffusionParams p{a.d, a.vx, a.vy, a.t};
  const auto b = a.boundary == "periodic" ? spectral::Boundary::periodic : spectral::Boundary::reflecting;
  const auto res = suites::physics_oracle(a.size, p, a.dt, b);
  const bool pass = res.rel_l2 <= a.tol;
  io::Report r;
  r.add("size", res.size);
  r.add("D", a.d);
  r.add("vx", a.vx);
  r.add("vy", a.vy);
  r.add("t", a.t);
  r.add("dt", res.dt);
  r.add("steps", res.steps);
  r.add("boundary", a.boundary);
  r.add("rel_l2", res.rel_l2);
  r.add("max_abs_err", res.max_abs);
  r.add("imag_residue", res.imag_residue);
  r.add("tolerance", a.tol);
  r.add("pass", pass ? "1" : "0");
  if (!a.report.empty()) r.write(a.report);
  out << r.str();
  if (!pass) {
    err << "oracle: relative L2 " << io::format_real(res.rel_l2) << " exceeds " << io::format_real(a.tol) << "\n";
    return kCheckFailed;
  }
  return kOk;
}

// ---- gradcheck ------------------------------------------------------------

struct GradcheckArgs {
  Common common;
  std::string target = "all", report;
};

int run_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = a.common.config();
  const auto rep = suites::gradcheck(a.target, cfg.seed);
  io::Report r;
  r.add("weights", kWeightsHeader);
  r.add("target", a.target);
  r.add("seed", std::to_string(cfg.seed));
  r.add("h", rep.h);
  r.add("tolerance", rep.tolerance);
  r.add("coordinates", rep.entries.size());
  r.add("failures", rep.failures());
  r.add("max_rel_error", rep.max_rel_error());
  for (const auto& e : rep.entries)
    r.add(e.name + "[" + std::to_string(e.index) + "]",
          io::format_real(e.analytic) + " " + io::format_real(e.numeric) + " " +
              io::format_real(e.rel_error) + (e.pass ? " ok" : " FAIL"));
  if (!a.report.empty()) r.write(a.report);
  out << r.str();
  if (!rep.passed()) {
    err << "gradcheck: " << rep.failures() << " of " << rep.entries.size() << " coordinates exceed tolerance\n";
    return kCheckFailed;
  }
  return kOk;
}

// ---- erf ------------------------------------------------------------------

struct ErfArgs {
  Common common;
  std::string net = "dwconv", out, report;
  int size = 32, channels = 2;
  std::vector<double> thresholds{0.2, 0.3, 0.5, 0.99};
  double alpha_decay = gas::kDefaultAlphaDecay;
  CLI::Option* alpha_opt = nullptr;
};

int run_erf(const ErfArgs& a, std::ostream& out) {
  const RunConfig cfg = a.common.config();
  const double alpha = a.alpha_opt->count() > 0 ? a.alpha_decay : cfg.alpha_decay_init;
  const auto net = a.net == "dwconv" ? analysis::dwconv_network(a.channels, cfg.seed)
                                     : analysis::gasblock_network(a.channels, cfg.seed, alpha);
  const auto erf = analysis::erf_map(net, a.size, a.size, cfg.seed);
  Tensor img(Shape{1, 1, a.size, a.size});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(erf.values[i]);
  if (!a.out.empty()) io::write_pgm(img, a.out);
  io::Report r;
  r.add("weights", kWeightsHeader);
  r.add("network", erf.description);
  r.add("size", a.size);
  r.add("samples", analysis::kErfSamples);
  for (double t : a.thresholds) r.add("ratio@" + io::format_real(t), analysis::contribution_ratio(erf, t));
  if (!a.report.empty()) r.write(a.report);
  out << r.str();
  return kOk;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  int size = 64;
  std::string out;
};

}  // namespace

Tensor synthetic_plume(int n) {
  if (n < 8) throw std::invalid_argument("synthetic plume needs n >= 8");
  // Release left of centre, carried right and slightly down, then spread.
  TensorD u0(Shape{1, 1, n, n});
  const double cy = 0.45 * n, cx = 0.3 * n, s = n / 20.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double r2 = (i - cy) * (i - cy) + (j - cx) * (j - cx);
      u0.at(0, 0, i, j) = std::exp(-r2 / (2 * s * s)) + 0.6 * std::exp(-r2 / (8 * s * s));
    }
  const spectral::DiffusionParams p{0.04 * n, 0.1 * n, 0.025 * n, 2.0};
  const TensorD u = spectral::spectral_solve(u0, p);
  double lo = u[0], hi = u[0];
  for (double v : u.data()) lo = std::min(lo, v), hi = std::max(hi, v);
  Tensor img(u.shape());
  for (std::size_t i = 0; i < u.size(); ++i) img[i] = static_cast<float>((u[i] - lo) / (hi - lo));
  return img;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Physics-guided edge and routing operators for gas plume imagery", "plume"};
  app.require_subcommand(1);

  auto in_file = [](CLI::App* sub, const std::string& flag, std::string& target, const std::string& desc) {
    return sub->add_option(flag, target, desc)->required();
  };

  EdgeArgs edge_a;
  auto* edge_cmd = app.add_subcommand("edge", "edge prior (AGPEO map or one of its components)");
  in_file(edge_cmd, "--in", edge_a.in, "input image (PGM or tensor file)");
  edge_cmd->add_option("--out", edge_a.out, "output PGM")->required();
  edge_cmd->add_option("--out-tensor", edge_a.out_tensor, "also write the map as a tensor file");
  edge_cmd->add_option("--alpha", edge_a.alpha, "fusion weight in [0,1] or learned-init")->capture_default_str();
  edge_cmd->add_option("--component", edge_a.component, "map to write")
      ->check(CLI::IsMember({"agpeo", "gradient", "phase", "sobel", "laplacian"}))
      ->capture_default_str();
  add_config(edge_cmd, edge_a.common, false);

  PyramidArgs pyr_a;
  auto* pyr_cmd = app.add_subcommand("pyramid", "multi-scale edge pyramid");
  in_file(pyr_cmd, "--in", pyr_a.in, "input image (PGM or tensor file)");
  pyr_a.levels_opt = pyr_cmd->add_option("--levels", pyr_a.levels, "pooling levels N (default: config)");
  pyr_cmd->add_option("--out-prefix", pyr_a.prefix, "prefix for E<i>.pgm and P<i>.gtsr")->required();
  pyr_cmd->add_option("--channels", pyr_a.channels, "projection width")->check(CLI::PositiveNumber)->capture_default_str();
  add_config(pyr_cmd, pyr_a.common, true);

  GasArgs gas_a;
  auto* gas_cmd = app.add_subcommand("gasblock", "one gas block forward pass with trace dump");
  in_file(gas_cmd, "--in", gas_a.in, "feature tensor (tensor file or PGM)");
  in_file(gas_cmd, "--edge", gas_a.edge, "edge prior (tensor file or PGM)");
  gas_a.alpha_opt = gas_cmd->add_option("--alpha-decay", gas_a.alpha_decay, "decay scale (default: config)")
                        ->check(CLI::NonNegativeNumber);
  gas_cmd->add_option("--out", gas_a.out, "output tensor file")->required();
  gas_cmd->add_option("--trace-prefix", gas_a.trace_prefix, "prefix for trace tensors (default: <out>.)");
  add_config(gas_cmd, gas_a.common, true);

  ImportanceArgs imp_a;
  auto* imp_cmd = app.add_subcommand("importance", "importance map of a feature tensor");
  in_file(imp_cmd, "--in", imp_a.in, "feature tensor (tensor file or PGM)");
  imp_cmd->add_option("--out", imp_a.out, "output tensor file")->required();
  add_config(imp_cmd, imp_a.common, true);

  RouteArgs route_a;
  auto* route_cmd = app.add_subcommand("route", "content-adaptive routing over a three-level pyramid");
  in_file(route_cmd, "--p3", route_a.p3, "shallow level, 2H x 2W");
  in_file(route_cmd, "--p4", route_a.p4, "mid level, H x W");
  in_file(route_cmd, "--p5", route_a.p5, "deep level, H/2 x W/2");
  route_cmd->add_option("--out-prefix", route_a.prefix, "prefix for output tensors and report.txt")->required();
  route_cmd->add_option("--disable-path", route_a.disabled, "close path 1-4 (repeatable)")
      ->check(CLI::Range(1, 4));
  add_config(route_cmd, route_a.common, true);

  OracleArgs or_a;
  auto* or_cmd = app.add_subcommand("oracle", "spectral solution vs finite-difference rollout");
  or_cmd->add_option("--size", or_a.size, "grid size N")->check(CLI::Range(4, 4096))->capture_default_str();
  or_cmd->add_option("--D", or_a.d, "diffusion coefficient")->capture_default_str();
  or_cmd->add_option("--vx", or_a.vx, "velocity along the width axis")->capture_default_str();
  or_cmd->add_option("--vy", or_a.vy, "velocity along the height axis")->capture_default_str();
  or_cmd->add_option("--t", or_a.t, "final time")->capture_default_str();
  or_cmd->add_option("--dt", or_a.dt, "time step")->capture_default_str();
  or_cmd->add_option("--tol", or_a.tol, "relative L2 tolerance")->capture_default_str();
  or_cmd->add_option("--boundary", or_a.boundary, "finite-difference boundary")
      ->check(CLI::IsMember({"periodic", "reflecting"}))
      ->capture_default_str();
  or_cmd->add_option("--report", or_a.report, "also write the report to this file");

  GradcheckArgs gc_a;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gc_cmd->add_option("--target", gc_a.target, "operator family")
      ->check(CLI::IsMember({"gasblock", "agpeo", "ie", "aimm", "all"}))
      ->capture_default_str();
  gc_cmd->add_option("--report", gc_a.report, "also write the report to this file");
  add_config(gc_cmd, gc_a.common, true);

  ErfArgs erf_a;
  auto* erf_cmd = app.add_subcommand("erf", "effective receptive field map and area ratios");
  erf_cmd->add_option("--net", erf_a.net, "network")->check(CLI::IsMember({"dwconv", "gasblock"}))->capture_default_str();
  erf_cmd->add_option("--size", erf_a.size, "input size N")->check(CLI::Range(3, 1024))->capture_default_str();
  erf_cmd->add_option("--channels", erf_a.channels, "feature channels")->check(CLI::Range(1, 64))->capture_default_str();
  erf_cmd->add_option("--thresholds", erf_a.thresholds, "comma-separated mass fractions in (0,1)")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  erf_a.alpha_opt = erf_cmd->add_option("--alpha-decay", erf_a.alpha_decay, "gas block decay scale (default: config)")
                        ->check(CLI::NonNegativeNumber);
  erf_cmd->add_option("--out", erf_a.out, "ERF map as PGM");
  erf_cmd->add_option("--report", erf_a.report, "also write the report to this file");
  add_config(erf_cmd, erf_a.common, true);

  SynthArgs syn_a;
  auto* syn_cmd = app.add_subcommand("synth", "write the synthetic plume test image");
  syn_cmd->add_option("--size", syn_a.size, "image size N")->check(CLI::Range(8, 4096))->capture_default_str();
  syn_cmd->add_option("--out", syn_a.out, "output PGM")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "plume: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (edge_cmd->parsed()) return run_edge(edge_a, out);
    if (pyr_cmd->parsed()) return run_pyramid(pyr_a, out);
    if (gas_cmd->parsed()) return run_gasblock(gas_a, out);
    if (imp_cmd->parsed()) return run_importance(imp_a, out);
    if (route_cmd->parsed()) return run_route(route_a, out);
    if (or_cmd->parsed()) return run_oracle(or_a, out, err);
    if (gc_cmd->parsed()) return run_gradcheck(gc_a, out, err);
    if (erf_cmd->parsed()) return run_erf(erf_a, out);
    if (syn_cmd->parsed()) {
      io::write_pgm(synthetic_plume(syn_a.size), syn_a.out);
      return kOk;
    }
  } catch (const spectral::CflError& e) {
    err << "plume: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const std::exception& e) {
    err << "plume: " << e.what() << "\n";
    return kUsage;
  }
  err << "plume: no subcommand\n";
  return kUsage;
}

}  // namespace plume::cli
