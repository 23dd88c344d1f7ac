#pragma once

#include <string>
#include <utility>
#include <vector>

#include "plume/ops.hpp"
#include "plume/prng.hpp"

namespace plume::gas {

inline constexpr double kOutNormEps = 1e-5;
inline constexpr double kDefaultAlphaDecay = 0.5;

/// softplus(raw) = alpha; the inverse used to store a requested alpha.
double alpha_from_raw(double raw);
double raw_from_alpha(double alpha);

/// Learnable state of one diffusion-convection block over C channels with an
/// E-channel edge prior.
template <typename Real>
struct GasBlockParams {
  KernelWeights<Real> dw;         // depthwise 3x3, C -> C, no bias
  KernelWeights<Real> in_proj;    // pointwise C -> 2C; first C = feature, last C = gate
  BasicTensor<Real> alpha_decay_raw = BasicTensor<Real>::scalar(0);  // alpha = softplus(raw)
  BasicTensor<Real> w_f;          // (1, C, 1, 1) channel weights on the decayed spectrum
  KernelWeights<Real> gate_conv;  // pointwise E -> C
  BasicTensor<Real> norm_gain;    // (1, C, 1, 1)
  BasicTensor<Real> norm_bias;    // (1, C, 1, 1)
  KernelWeights<Real> out_proj;   // pointwise C -> C

  int channels() const { return w_f.channels(); }
  int edge_channels() const { return gate_conv.in_channels(); }
  double alpha_decay() const { return alpha_from_raw(alpha_decay_raw.item()); }
  void set_alpha_decay(double alpha) {
    alpha_decay_raw = BasicTensor<Real>::scalar(static_cast<Real>(raw_from_alpha(alpha)));
  }

  /// Seeded init: fan-in uniform convolutions, W_f = 1, identity norm,
  /// alpha_decay = `alpha`.
  static GasBlockParams init(int channels, int edge_channels, Prng& rng,
                             double alpha = kDefaultAlphaDecay);
};

template <typename Real>
struct GasBlockVars {
  ad::ConvVars<Real> dw, in_proj, gate_conv, out_proj;
  Var<Real> alpha_decay_raw, w_f, norm_gain, norm_bias;

  /// Every learnable leaf in declaration order.
  std::vector<Var<Real>> parameters() const;
};

template <typename Real>
GasBlockVars<Real> bind(Tape<Real>& tape, const GasBlockParams<Real>& p,
                        const std::string& prefix = "gas");

/// Every intermediate of one forward pass.
template <typename Real>
struct GasBlockTrace {
  BasicTensor<Real> x_local;
  BasicTensor<Real> x_proj;
  BasicTensor<Real> z;
  BasicTensor<Real> x_global_pre;  // before edge gating
  BasicTensor<Real> gate;
  BasicTensor<Real> x_global;      // after edge gating
  BasicTensor<Real> y_pre;         // Y'
  BasicTensor<Real> y;
};

template <typename Real>
struct GasBlockTraceVars {
  Var<Real> x_local, x_proj, z, x_global_pre, gate, x_global, y_pre, y;
  GasBlockTrace<Real> values() const;
};

// Differentiable building blocks.
template <typename Real>
Var<Real> local_branch(Var<Real> x, const GasBlockVars<Real>& p);
template <typename Real>
std::pair<Var<Real>, Var<Real>> project_split(Var<Real> x_local, const GasBlockVars<Real>& p);
template <typename Real>
Var<Real> global_branch(Var<Real> x_proj, const GasBlockVars<Real>& p);
template <typename Real>
Var<Real> edge_gate(Var<Real> edge, const GasBlockVars<Real>& p, const Shape& feature_shape);
template <typename Real>
GasBlockTraceVars<Real> forward(Var<Real> x, Var<Real> edge, const GasBlockVars<Real>& p);

// Value-level wrappers over a private tape.
template <typename Real>
BasicTensor<Real> local_branch(const BasicTensor<Real>& x, const GasBlockParams<Real>& p);
template <typename Real>
std::pair<BasicTensor<Real>, BasicTensor<Real>> project_split(const BasicTensor<Real>& x_local,
                                                              const GasBlockParams<Real>& p);
template <typename Real>
BasicTensor<Real> global_branch(const BasicTensor<Real>& x_proj, const GasBlockParams<Real>& p);
template <typename Real>
BasicTensor<Real> edge_gate(const BasicTensor<Real>& edge, const GasBlockParams<Real>& p,
                            const Shape& feature_shape);
/// Y = silu(OutLinear(OutNorm(X_local + X_global * G(E)) * sigmoid(Z)) + x).
template <typename Real>
GasBlockTrace<Real> gas_block_forward(const BasicTensor<Real>& x, const BasicTensor<Real>& edge,
                                      const GasBlockParams<Real>& p);

}  // namespace plume::gas
