#pragma once

#include <vector>

#include "plume/ops.hpp"
#include "plume/prng.hpp"

namespace plume::edge {

inline constexpr double kEps = 1e-6;
inline constexpr double kDefaultAlpha = 0.7;
inline constexpr int kDefaultGaborScales = 3;
inline constexpr int kDefaultPyramidLevels = 3;

/// Fixed Sobel-family 3x3 kernels, one per orientation in {0, 45, 90, 135}
/// degrees. 0 is Sobel-x, 90 is Sobel-y, 45/135 are the rotated stencils.
template <typename Real>
struct DirectionalBank {
  std::vector<int> angles;
  std::vector<BasicTensor<Real>> kernels;  // each (1, 1, 3, 3)

  static DirectionalBank make(const std::vector<int>& angles = {0, 45, 90, 135});
};

/// Even/odd Gabor quadrature pairs, one per scale. Wavelengths 3 * 2^s
/// pixels, a shared isotropic Gaussian envelope, carrier along the width
/// axis, 7x7 support. Even kernels are made zero-mean; both are unit L2.
template <typename Real>
struct GaborBank {
  std::vector<double> wavelengths;
  double sigma = 2.0;
  int extent = 7;
  std::vector<BasicTensor<Real>> even;  // each (1, 1, extent, extent)
  std::vector<BasicTensor<Real>> odd;

  static GaborBank make(int scales = kDefaultGaborScales);
};

template <typename Real>
struct EdgeBanks {
  DirectionalBank<Real> directional = DirectionalBank<Real>::make();
  GaborBank<Real> gabor = GaborBank<Real>::make();
};

/// Fusion weight stored as a logit so alpha = sigmoid(logit) stays in (0, 1).
/// The default logit is log(0.7 / 0.3), i.e. alpha = kDefaultAlpha.
template <typename Real>
struct AgpeoParams {
  BasicTensor<Real> alpha_logit = BasicTensor<Real>::scalar(static_cast<Real>(0.8472978603872037));
  double eps = kEps;

  double alpha() const;
  static AgpeoParams with_alpha(double alpha);
};

/// Per-level pointwise projections of the pooled edge maps.
template <typename Real>
struct MsepmParams {
  std::vector<KernelWeights<Real>> projections;  // levels + 1 entries

  int levels() const { return static_cast<int>(projections.size()) - 1; }
  static MsepmParams init(int levels, int in_channels, int out_channels, Prng& rng);
  static MsepmParams identity(int levels, int channels);
};

template <typename Real>
struct EdgePyramid {
  std::vector<BasicTensor<Real>> levels;     // E_0 .. E_N
  std::vector<BasicTensor<Real>> projected;  // projected E_0 .. E_N
};

// Differentiable forms.
template <typename Real>
Var<Real> directional_gradient(Var<Real> x, const DirectionalBank<Real>& bank);
template <typename Real>
Var<Real> phase_congruency(Var<Real> x, const GaborBank<Real>& bank, double eps);
/// g / (per-image max + eps)
template <typename Real>
Var<Real> normalize_by_max(Var<Real> g, double eps);
/// alpha * g_norm + (1 - alpha) * p with alpha a (1,1,1,1) var.
template <typename Real>
Var<Real> fuse(Var<Real> g_norm, Var<Real> p, Var<Real> alpha);

template <typename Real>
struct AgpeoVars {
  Var<Real> g_norm, p, alpha, e0;
};
template <typename Real>
AgpeoVars<Real> agpeo(Var<Real> x, Var<Real> alpha_logit, const EdgeBanks<Real>& banks, double eps);

template <typename Real>
struct EdgePyramidVars {
  std::vector<Var<Real>> levels;
  std::vector<Var<Real>> projected;
};
template <typename Real>
EdgePyramidVars<Real> build_pyramid(Var<Real> e0, const std::vector<ad::ConvVars<Real>>& projections);

// Value-level API.
template <typename Real>
BasicTensor<Real> directional_gradient(const BasicTensor<Real>& x, const DirectionalBank<Real>& bank);
template <typename Real>
BasicTensor<Real> phase_congruency(const BasicTensor<Real>& x, const GaborBank<Real>& bank,
                                   double eps = kEps);

template <typename Real>
struct AgpeoResult {
  BasicTensor<Real> g_norm;
  BasicTensor<Real> p;
  BasicTensor<Real> e0;
};
template <typename Real>
AgpeoResult<Real> agpeo(const BasicTensor<Real>& x, const AgpeoParams<Real>& params,
                        const EdgeBanks<Real>& banks);
/// Fixed-alpha variant; alpha in [0, 1], endpoints included.
template <typename Real>
AgpeoResult<Real> agpeo_fixed(const BasicTensor<Real>& x, double alpha, const EdgeBanks<Real>& banks,
                              double eps = kEps);

/// Requires H, W >= 2^levels.
template <typename Real>
EdgePyramid<Real> build_pyramid(const BasicTensor<Real>& e0, const MsepmParams<Real>& params);

/// sqrt((Sobel-x * x)^2 + (Sobel-y * x)^2)
template <typename Real>
BasicTensor<Real> sobel_edge(const BasicTensor<Real>& x);
/// |5-point Laplacian * x|
template <typename Real>
BasicTensor<Real> laplacian_edge(const BasicTensor<Real>& x);

}  // namespace plume::edge
