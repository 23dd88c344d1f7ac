#pragma once

#include <optional>
#include <vector>

#include "plume/kernels.hpp"
#include "plume/tape.hpp"

// Differentiable operations recorded on a Tape. Only the operations this
// library composes are provided. Binary arithmetic broadcasts any axis of
// extent 1.
namespace plume::ad {

enum class Unary { sigmoid, relu, silu, abs, exp_neg, softplus };

template <typename Real>
struct ConvVars {
  ConvMode mode = ConvMode::dense;
  Var<Real> weight;
  std::optional<Var<Real>> bias;
};

/// Put `kw` on the tape as leaves named `<name>.weight` / `<name>.bias`.
template <typename Real>
ConvVars<Real> bind(Tape<Real>& tape, const KernelWeights<Real>& kw, const std::string& name);

template <typename Real>
Var<Real> conv2d(Var<Real> x, const ConvVars<Real>& w);

template <typename Real>
Var<Real> maxpool2(Var<Real> x);
template <typename Real>
Var<Real> global_avg(Var<Real> x);
template <typename Real>
Var<Real> channel_std(Var<Real> x);
template <typename Real>
Var<Real> upsample_nearest(Var<Real> x, int target_h, int target_w);

template <typename Real>
Var<Real> unary(Var<Real> x, Unary kind);
template <typename Real>
Var<Real> sigmoid(Var<Real> x) { return unary(x, Unary::sigmoid); }
template <typename Real>
Var<Real> relu(Var<Real> x) { return unary(x, Unary::relu); }
template <typename Real>
Var<Real> silu(Var<Real> x) { return unary(x, Unary::silu); }

template <typename Real>
Var<Real> add(Var<Real> a, Var<Real> b);
template <typename Real>
Var<Real> sub(Var<Real> a, Var<Real> b);
template <typename Real>
Var<Real> mul(Var<Real> a, Var<Real> b);
template <typename Real>
Var<Real> div(Var<Real> a, Var<Real> b);
template <typename Real>
Var<Real> scale(Var<Real> x, double s);
template <typename Real>
Var<Real> add_scalar(Var<Real> x, double s);

/// Orthonormal 2D DCT-II / its inverse per plane.
template <typename Real>
Var<Real> dct2(Var<Real> x);
template <typename Real>
Var<Real> idct2(Var<Real> x);

template <typename Real>
Var<Real> slice_channels(Var<Real> x, int begin, int count);
template <typename Real>
Var<Real> concat_channels(const std::vector<Var<Real>>& parts);

/// Zero-mean, unit-variance over the channel axis at each (b, h, w).
/// A single channel normalizes to 0.
template <typename Real>
Var<Real> channel_norm(Var<Real> x, double eps);

/// Softmax over the channel axis at each (b, h, w).
template <typename Real>
Var<Real> softmax_channels(Var<Real> x);

/// Elementwise maximum of equally shaped tensors; ties go to the first.
template <typename Real>
Var<Real> maximum(const std::vector<Var<Real>>& xs);

/// sqrt(a^2 + b^2), with zero gradient where both vanish.
template <typename Real>
Var<Real> hypot(Var<Real> a, Var<Real> b);

/// Maximum over (C, H, W) per batch item, shape (B, 1, 1, 1).
template <typename Real>
Var<Real> image_max(Var<Real> x);

/// Sum of every entry, shape (1, 1, 1, 1).
template <typename Real>
Var<Real> sum_all(Var<Real> x);

/// Broadcast shape of `a` and `b`; throws ShapeError naming the axis.
Shape broadcast_shape(const Shape& a, const Shape& b);

/// Sum `t` down to `target` over broadcast axes.
template <typename Real>
BasicTensor<Real> reduce_to(const BasicTensor<Real>& t, const Shape& target);

}  // namespace plume::ad
