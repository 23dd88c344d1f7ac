#include "plume/gas_block.hpp"

#include <cmath>

#include "plume/spectral.hpp"

namespace plume::gas {

double alpha_from_raw(double raw) {
  return std::log1p(std::exp(-std::fabs(raw))) + std::max(raw, 0.0);
}

double raw_from_alpha(double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("alpha_decay must be >= 0");
  if (alpha == 0.0) return -std::numeric_limits<double>::infinity();
  if (alpha > 30.0) return alpha + std::log(-std::expm1(-alpha));
  return std::log(std::expm1(alpha));
}

template <typename Real>
GasBlockParams<Real> GasBlockParams<Real>::init(int channels, int edge_channels, Prng& rng,
                                                double alpha) {
  GasBlockParams p;
  p.dw = KernelWeights<Real>::init(ConvMode::depthwise, channels, channels, 3, false, rng);
  p.in_proj = KernelWeights<Real>::init(ConvMode::pointwise, channels, 2 * channels, 1, true, rng);
  p.set_alpha_decay(alpha);
  p.w_f = BasicTensor<Real>(Shape{1, channels, 1, 1}, Real(1));
  p.gate_conv =
      KernelWeights<Real>::init(ConvMode::pointwise, edge_channels, channels, 1, true, rng);
  p.norm_gain = BasicTensor<Real>(Shape{1, channels, 1, 1}, Real(1));
  p.norm_bias = BasicTensor<Real>(Shape{1, channels, 1, 1}, Real(0));
  p.out_proj = KernelWeights<Real>::init(ConvMode::pointwise, channels, channels, 1, true, rng);
  return p;
}

template <typename Real>
std::vector<Var<Real>> GasBlockVars<Real>::parameters() const {
  std::vector<Var<Real>> out;
  auto conv = [&](const ad::ConvVars<Real>& c) {
    out.push_back(c.weight);
    if (c.bias) out.push_back(*c.bias);
  };
  conv(dw);
  conv(in_proj);
  out.push_back(alpha_decay_raw);
  out.push_back(w_f);
  conv(gate_conv);
  out.push_back(norm_gain);
  out.push_back(norm_bias);
  conv(out_proj);
  return out;
}

template <typename Real>
GasBlockVars<Real> bind(Tape<Real>& tape, const GasBlockParams<Real>& p, const std::string& prefix) {
  GasBlockVars<Real> v;
  v.dw = ad::bind(tape, p.dw, prefix + ".dw");
  v.in_proj = ad::bind(tape, p.in_proj, prefix + ".in_proj");
  v.alpha_decay_raw = tape.leaf(p.alpha_decay_raw, prefix + ".alpha_decay_raw");
  v.w_f = tape.leaf(p.w_f, prefix + ".w_f");
  v.gate_conv = ad::bind(tape, p.gate_conv, prefix + ".gate_conv");
  v.norm_gain = tape.leaf(p.norm_gain, prefix + ".norm_gain");
  v.norm_bias = tape.leaf(p.norm_bias, prefix + ".norm_bias");
  v.out_proj = ad::bind(tape, p.out_proj, prefix + ".out_proj");
  return v;
}

template <typename Real>
GasBlockTrace<Real> GasBlockTraceVars<Real>::values() const {
  return GasBlockTrace<Real>{x_local.value(),      x_proj.value(), z.value(),
                             x_global_pre.value(), gate.value(),   x_global.value(),
                             y_pre.value(),        y.value()};
}

template <typename Real>
Var<Real> local_branch(Var<Real> x, const GasBlockVars<Real>& p) {
  if (x.shape().channels != p.w_f.shape().channels)
    throw ShapeError("gas block: channel axis mismatch, input has " +
                     std::to_string(x.shape().channels) + " channels, block expects " +
                     std::to_string(p.w_f.shape().channels));
  return ad::conv2d(x, p.dw);
}

template <typename Real>
std::pair<Var<Real>, Var<Real>> project_split(Var<Real> x_local, const GasBlockVars<Real>& p) {
  const int C = x_local.shape().channels;
  Var<Real> proj = ad::conv2d(x_local, p.in_proj);
  if (proj.shape().channels != 2 * C)
    throw ShapeError("gas block: in_proj must map " + std::to_string(C) + " to " +
                     std::to_string(2 * C) + " channels");
  return {ad::slice_channels(proj, 0, C), ad::slice_channels(proj, C, C)};
}

template <typename Real>
Var<Real> global_branch(Var<Real> x_proj, const GasBlockVars<Real>& p) {
  Tape<Real>& tape = *x_proj.tape;
  const Shape s = x_proj.shape();
  const Var<Real> k2 = tape.leaf(spectral::freq_grid(s.height, s.width).k2_tensor<Real>(), "K2");
  const Var<Real> alpha = ad::unary(p.alpha_decay_raw, ad::Unary::softplus);
  const Var<Real> decay = ad::unary(ad::mul(alpha, k2), ad::Unary::exp_neg);
  const Var<Real> coeffs = ad::dct2(x_proj);
  return ad::idct2(ad::mul(ad::mul(coeffs, decay), p.w_f));
}

template <typename Real>
Var<Real> edge_gate(Var<Real> edge, const GasBlockVars<Real>& p, const Shape& feature_shape) {
  const Shape e = edge.shape();
  if (e.batch != feature_shape.batch)
    throw ShapeError("edge gate: batch axis mismatch " + e.str() + " vs " + feature_shape.str());
  if (e.height != feature_shape.height)
    throw ShapeError("edge gate: height axis mismatch " + e.str() + " vs " + feature_shape.str());
  if (e.width != feature_shape.width)
    throw ShapeError("edge gate: width axis mismatch " + e.str() + " vs " + feature_shape.str());
  return ad::sigmoid(ad::conv2d(edge, p.gate_conv));
}

template <typename Real>
GasBlockTraceVars<Real> forward(Var<Real> x, Var<Real> edge, const GasBlockVars<Real>& p) {
  GasBlockTraceVars<Real> t;
  t.x_local = local_branch(x, p);
  std::tie(t.x_proj, t.z) = project_split(t.x_local, p);
  t.x_global_pre = global_branch(t.x_proj, p);
  t.gate = edge_gate(edge, p, x.shape());
  t.x_global = ad::mul(t.x_global_pre, t.gate);
  Var<Real> fused = ad::channel_norm(ad::add(t.x_local, t.x_global), kOutNormEps);
  fused = ad::add(ad::mul(fused, p.norm_gain), p.norm_bias);
  t.y_pre = ad::conv2d(ad::mul(fused, ad::sigmoid(t.z)), p.out_proj);
  t.y = ad::silu(ad::add(t.y_pre, x));
  return t;
}

template <typename Real>
BasicTensor<Real> local_branch(const BasicTensor<Real>& x, const GasBlockParams<Real>& p) {
  Tape<Real> tape;
  return local_branch(tape.leaf(x), bind(tape, p)).value();
}

template <typename Real>
std::pair<BasicTensor<Real>, BasicTensor<Real>> project_split(const BasicTensor<Real>& x_local,
                                                              const GasBlockParams<Real>& p) {
  Tape<Real> tape;
  auto [a, b] = project_split(tape.leaf(x_local), bind(tape, p));
  return {a.value(), b.value()};
}

template <typename Real>
BasicTensor<Real> global_branch(const BasicTensor<Real>& x_proj, const GasBlockParams<Real>& p) {
  Tape<Real> tape;
  return global_branch(tape.leaf(x_proj), bind(tape, p)).value();
}

template <typename Real>
BasicTensor<Real> edge_gate(const BasicTensor<Real>& edge, const GasBlockParams<Real>& p,
                            const Shape& feature_shape) {
  Tape<Real> tape;
  return edge_gate(tape.leaf(edge), bind(tape, p), feature_shape).value();
}

template <typename Real>
GasBlockTrace<Real> gas_block_forward(const BasicTensor<Real>& x, const BasicTensor<Real>& edge,
                                      const GasBlockParams<Real>& p) {
  Tape<Real> tape;
  return forward(tape.leaf(x, "x"), tape.leaf(edge, "edge"), bind(tape, p)).values();
}

#define PLUME_INSTANTIATE_GAS(R)                                                                \
  template struct GasBlockParams<R>;                                                            \
  template struct GasBlockVars<R>;                                                              \
  template struct GasBlockTraceVars<R>;                                                         \
  template GasBlockVars<R> bind(Tape<R>&, const GasBlockParams<R>&, const std::string&);        \
  template Var<R> local_branch(Var<R>, const GasBlockVars<R>&);                                 \
  template std::pair<Var<R>, Var<R>> project_split(Var<R>, const GasBlockVars<R>&);             \
  template Var<R> global_branch(Var<R>, const GasBlockVars<R>&);                                \
  template Var<R> edge_gate(Var<R>, const GasBlockVars<R>&, const Shape&);                      \
  template GasBlockTraceVars<R> forward(Var<R>, Var<R>, const GasBlockVars<R>&);                \
  template BasicTensor<R> local_branch(const BasicTensor<R>&, const GasBlockParams<R>&);        \
  template std::pair<BasicTensor<R>, BasicTensor<R>> project_split(const BasicTensor<R>&,       \
                                                                   const GasBlockParams<R>&);   \
  template BasicTensor<R> global_branch(const BasicTensor<R>&, const GasBlockParams<R>&);       \
  template BasicTensor<R> edge_gate(const BasicTensor<R>&, const GasBlockParams<R>&,            \
                                    const Shape&);                                              \
  template GasBlockTrace<R> gas_block_forward(const BasicTensor<R>&, const BasicTensor<R>&,     \
                                              const GasBlockParams<R>&);

PLUME_INSTANTIATE_GAS(float)
PLUME_INSTANTIATE_GAS(double)

#undef PLUME_INSTANTIATE_GAS

}  // namespace plume::gas
