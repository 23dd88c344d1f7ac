#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "plume/ops.hpp"
#include "plume/prng.hpp"

namespace plume::routing {

inline constexpr double kBA = 0.5;    // fixed modulation offset
inline constexpr double kIDAS = 1.0;  // identity term of the self path
inline constexpr double kStdEps = 1e-6;
inline constexpr int kPaths = 4;

inline int reduced_channels(int channels) { return std::max(channels / 4, 1); }

/// Three-branch importance estimator over C channels.
template <typename Real>
struct ImportanceParams {
  KernelWeights<Real> global_reduce, global_expand;  // pointwise C -> C_r -> C
  KernelWeights<Real> local_reduce, local_expand;    // dense 3x3 C -> C_r, pointwise C_r -> C
  KernelWeights<Real> div_reduce, div_expand;        // pointwise C -> C_r -> C
  BasicTensor<Real> fusion_logits = BasicTensor<Real>(Shape{1, 3, 1, 1});  // (g, l, d)

  int channels() const { return global_expand.out_channels(); }
  static ImportanceParams init(int channels, Prng& rng);
  /// Every weight and bias zero, logits zero.
  static ImportanceParams zeros(int channels);
};

/// x + conv2(silu(conv1(x))), two dense 3x3 convolutions.
template <typename Real>
struct RefineParams {
  KernelWeights<Real> conv1, conv2;

  static RefineParams init(int channels, Prng& rng);
  /// conv2 zeroed, so the block is the identity.
  static RefineParams identity(int channels);
};

template <typename Real>
struct CasrParams {
  ImportanceParams<Real> importance;
  KernelWeights<Real> path_head;  // pointwise C -> 4 with bias
  RefineParams<Real> refine_p3, refine_p4;
  /// Path i disabled means W_i = 0.
  std::array<bool, kPaths> enabled{true, true, true, true};

  static CasrParams init(int channels, Prng& rng);
};

template <typename Real>
struct ImportanceVars {
  ad::ConvVars<Real> global_reduce, global_expand, local_reduce, local_expand, div_reduce,
      div_expand;
  Var<Real> fusion_logits;
  std::vector<Var<Real>> parameters() const;
};

template <typename Real>
struct RefineVars {
  ad::ConvVars<Real> conv1, conv2;
  std::vector<Var<Real>> parameters() const;
};

template <typename Real>
struct CasrVars {
  ImportanceVars<Real> importance;
  ad::ConvVars<Real> path_head;
  RefineVars<Real> refine_p3, refine_p4;
  std::array<bool, kPaths> enabled{true, true, true, true};
  std::vector<Var<Real>> parameters() const;
};

template <typename Real>
ImportanceVars<Real> bind(Tape<Real>& tape, const ImportanceParams<Real>& p,
                          const std::string& prefix = "ie");
template <typename Real>
RefineVars<Real> bind(Tape<Real>& tape, const RefineParams<Real>& p, const std::string& prefix);
template <typename Real>
CasrVars<Real> bind(Tape<Real>& tape, const CasrParams<Real>& p, const std::string& prefix = "casr");

/// P3 at 2H x 2W, P4 at H x W, P5 at H/2 x W/2, all with the same B and C.
template <typename Real>
struct FeaturePyramid {
  BasicTensor<Real> p3, p4, p5;
};
template <typename Real>
struct FeaturePyramidVars {
  Var<Real> p3, p4, p5;
};

/// Throws ShapeError unless the levels have exact factor-2 relations.
void check_pyramid(const Shape& p3, const Shape& p4, const Shape& p5);

// Differentiable forms.
template <typename Real>
struct ImportanceTraceVars {
  Var<Real> global, local, diversity, weights, importance;  // weights is (1, 3, 1, 1)
};
template <typename Real>
ImportanceTraceVars<Real> importance_map(Var<Real> x, const ImportanceVars<Real>& p);
/// Four (B, 1, H, W) maps.
template <typename Real>
std::array<Var<Real>, kPaths> path_weights(Var<Real> importance, const ad::ConvVars<Real>& head);
/// f1 + f2 * (w * (BA + sigmoid(std(f2))))
template <typename Real>
Var<Real> aimm_fuse(Var<Real> f1, Var<Real> f2, Var<Real> w);
/// IDAS + w * (BA + sigmoid(std(f)))
template <typename Real>
Var<Real> aimm_self_factor(Var<Real> f, Var<Real> w);
/// f * aimm_self_factor(f, w)
template <typename Real>
Var<Real> aimm_self(Var<Real> f, Var<Real> w);
template <typename Real>
Var<Real> refine(Var<Real> x, const RefineVars<Real>& p);

template <typename Real>
struct CasrTraceVars {
  Var<Real> importance;
  std::array<Var<Real>, kPaths> weights;  // at P4 resolution, zero when disabled
  Var<Real> p4_fused, p3_fused, p4_cross, p4_self;
  FeaturePyramidVars<Real> out;
};
template <typename Real>
CasrTraceVars<Real> casr_pan_forward(const FeaturePyramidVars<Real>& pyr, const CasrVars<Real>& p);

// Value-level API.
template <typename Real>
BasicTensor<Real> importance_map(const BasicTensor<Real>& x, const ImportanceParams<Real>& p);
/// softmax of the fusion logits, (w_g, w_l, w_d).
template <typename Real>
std::array<double, 3> fusion_weights(const ImportanceParams<Real>& p);
template <typename Real>
std::array<BasicTensor<Real>, kPaths> path_weights(const BasicTensor<Real>& importance,
                                                   const KernelWeights<Real>& head);
template <typename Real>
BasicTensor<Real> aimm_fuse(const BasicTensor<Real>& f1, const BasicTensor<Real>& f2,
                            const BasicTensor<Real>& w);
template <typename Real>
BasicTensor<Real> aimm_self(const BasicTensor<Real>& f, const BasicTensor<Real>& w);
template <typename Real>
BasicTensor<Real> aimm_self_factor(const BasicTensor<Real>& f, const BasicTensor<Real>& w);
/// (1 - w) * local + w * transport, computed in double; the result never
/// leaves [min(local, transport), max(local, transport)].
template <typename Real>
BasicTensor<Real> transport_blend(const BasicTensor<Real>& local, const BasicTensor<Real>& transport,
                                  const BasicTensor<Real>& w);
template <typename Real>
BasicTensor<Real> refine(const BasicTensor<Real>& x, const RefineParams<Real>& p);

template <typename Real>
struct CasrResult {
  BasicTensor<Real> importance;
  std::array<BasicTensor<Real>, kPaths> weights;
  FeaturePyramid<Real> out;
};
template <typename Real>
CasrResult<Real> casr_pan_forward(const FeaturePyramid<Real>& pyr, const CasrParams<Real>& p);

/// w / dt; throws std::invalid_argument for dt <= 0.
template <typename Real>
BasicTensor<Real> velocity_surrogate(const BasicTensor<Real>& w, double dt);

}  // namespace plume::routing
