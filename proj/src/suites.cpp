#include "plume/suites.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "plume/edge.hpp"
#include "plume/gas_block.hpp"
#include "plume/routing.hpp"

namespace plume::suites {

namespace {

constexpr int kChannels = 2;
constexpr int kSize = 8;

TensorD normal_tensor(Shape s, Prng& rng) {
  TensorD t(s);
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

// OutNorm over two channels is d / sqrt(d^2 + eps) in the channel
// difference d, a near-step that central differences at h = 1e-3 cannot
// resolve wherever d crosses zero. Four channels keep the normalization
// smooth almost everywhere.
constexpr int kGasChannels = 4;

analysis::GradCheckOptions with_seed(analysis::GradCheckOptions opt, Prng& rng) {
  opt.seed = rng.next_u64();
  return opt;
}

analysis::GradCheckReport check_gasblock(Prng& rng, const analysis::GradCheckOptions& opt) {
  Tape<double> tape;
  const auto params = gas::GasBlockParams<double>::init(kGasChannels, 1, rng);
  const auto x = tape.leaf(normal_tensor({1, kGasChannels, kSize, kSize}, rng), "x");
  const auto e = tape.leaf(uniform_tensor<double>({1, 1, kSize, kSize}, rng, 0.0, 1.0), "edge");
  const auto vars = gas::bind(tape, params);
  const auto t = gas::forward(x, e, vars);
  return analysis::grad_check(tape, {t.y}, vars.parameters(), with_seed(opt, rng), "gasblock");
}

analysis::GradCheckReport check_agpeo(Prng& rng, const analysis::GradCheckOptions& opt) {
  Tape<double> tape;
  const edge::EdgeBanks<double> banks;
  const auto x = tape.leaf(normal_tensor({1, kChannels, kSize, kSize}, rng), "x");
  const auto logit =
      tape.leaf(edge::AgpeoParams<double>::with_alpha(edge::kDefaultAlpha).alpha_logit, "agpeo.alpha_logit");
  const auto v = edge::agpeo(x, logit, banks, edge::kEps);
  const auto msepm = edge::MsepmParams<double>::init(2, kChannels, kChannels, rng);
  std::vector<ad::ConvVars<double>> proj;
  std::vector<Var<double>> params{logit};
  for (std::size_t i = 0; i < msepm.projections.size(); ++i) {
    proj.push_back(ad::bind(tape, msepm.projections[i], "msepm." + std::to_string(i)));
    params.push_back(proj.back().weight);
    params.push_back(*proj.back().bias);
  }
  const auto pyr = edge::build_pyramid(v.e0, proj);
  return analysis::grad_check(tape, pyr.projected, params, with_seed(opt, rng), "agpeo");
}

analysis::GradCheckReport check_ie(Prng& rng, const analysis::GradCheckOptions& opt) {
  Tape<double> tape;
  const auto params = routing::CasrParams<double>::init(kChannels, rng);
  const routing::FeaturePyramidVars<double> pyr{
      tape.leaf(normal_tensor({1, kChannels, 2 * kSize, 2 * kSize}, rng), "P3"),
      tape.leaf(normal_tensor({1, kChannels, kSize, kSize}, rng), "P4"),
      tape.leaf(normal_tensor({1, kChannels, kSize / 2, kSize / 2}, rng), "P5")};
  const auto vars = routing::bind(tape, params);
  const auto t = routing::casr_pan_forward(pyr, vars);
  return analysis::grad_check(tape, {t.out.p3, t.out.p4}, vars.parameters(), with_seed(opt, rng), "ie");
}

analysis::GradCheckReport check_aimm(Prng& rng, const analysis::GradCheckOptions& opt) {
  Tape<double> tape;
  const Shape s{1, kChannels, kSize, kSize};
  const auto f1 = tape.leaf(normal_tensor(s, rng), "aimm.f1");
  const auto f2 = tape.leaf(normal_tensor(s, rng), "aimm.f2");
  const auto w = tape.leaf(uniform_tensor<double>({1, 1, kSize, kSize}, rng, 0.0, 1.0), "aimm.w");
  const auto fused = routing::aimm_fuse(f1, f2, w);
  const auto self = routing::aimm_self(f2, w);
  return analysis::grad_check(tape, {fused, self}, {f1, f2, w}, with_seed(opt, rng), "aimm");
}

}  // namespace

const std::vector<std::string>& gradcheck_targets() {
  static const std::vector<std::string> t{"gasblock", "agpeo", "ie", "aimm"};
  return t;
}

analysis::GradCheckReport gradcheck(const std::string& target, std::uint64_t seed,
                                    const analysis::GradCheckOptions& opt) {
  const auto& all = gradcheck_targets();
  if (target != "all" && std::find(all.begin(), all.end(), target) == all.end())
    throw std::invalid_argument("unknown gradcheck target '" + target + "'");
  analysis::GradCheckReport report;
  report.target = target;
  report.h = opt.h;
  report.tolerance = opt.tolerance;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (target != "all" && target != all[i]) continue;
    // Each target draws from its own stream so "all" repeats the single runs.
    Prng rng = Prng(seed).fork(i + 1);
    if (all[i] == "gasblock") report.append(check_gasblock(rng, opt));
    if (all[i] == "agpeo") report.append(check_agpeo(rng, opt));
    if (all[i] == "ie") report.append(check_ie(rng, opt));
    if (all[i] == "aimm") report.append(check_aimm(rng, opt));
  }
  return report;
}

OracleResult physics_oracle(int n, const spectral::DiffusionParams& p, double dt,
                            spectral::Boundary boundary) {
  if (n < 4) throw std::invalid_argument("oracle: size must be >= 4");
  p.validate();
  spectral::check_cfl(p, dt);
  OracleResult r;
  r.size = n;
  r.steps = p.time > 0.0 ? static_cast<int>(std::ceil(p.time / dt - 1e-9)) : 0;
  r.dt = r.steps > 0 ? p.time / r.steps : 0.0;
  const auto u0 = spectral::gaussian_bump<double>(n, 3.0 * n / 32.0);
  const auto exact = spectral::spectral_solve(u0, p, &r.imag_residue);
  const auto fd = r.steps > 0 ? spectral::fd_rollout(u0, p, r.dt, r.steps, boundary) : u0;
  r.rel_l2 = spectral::relative_l2(fd, exact);
  for (std::size_t i = 0; i < fd.size(); ++i) r.max_abs = std::max(r.max_abs, std::fabs(fd[i] - exact[i]));
  return r;
}

}  // namespace plume::suites
