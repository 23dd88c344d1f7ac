#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "plume/prng.hpp"
#include "plume/tensor.hpp"

namespace plume {

enum class ConvMode { depthwise, pointwise, dense };

const char* to_string(ConvMode mode);

/// Convolution weights.
///
/// Layout of `weight`: (out_channels, in_channels_per_filter, k, k). Depthwise
/// filters have one input channel each, pointwise filters have k = 1. The
/// optional bias is (1, out_channels, 1, 1). Convolutions use the
/// cross-correlation convention (no kernel flip) with zero "same" padding.
template <typename Real>
struct KernelWeights {
  ConvMode mode = ConvMode::dense;
  BasicTensor<Real> weight;
  std::optional<BasicTensor<Real>> bias;

  int kernel_size() const { return weight.height(); }
  int out_channels() const { return weight.batch(); }
  int in_channels() const {
    return mode == ConvMode::depthwise ? weight.batch() : weight.channels();
  }

  /// Throws ShapeError if the weights are not usable on `input_channels`.
  void validate(int input_channels) const;

  static KernelWeights init(ConvMode mode, int in_channels, int out_channels, int k, bool with_bias,
                            Prng& rng);
  /// Pointwise identity over `channels`, zero bias.
  static KernelWeights identity(int channels);
};

namespace kernels {

// All kernels accumulate in double regardless of Real. Loops over
// independent output planes are OpenMP-parallel; no kernel reduces across
// threads, so results do not depend on the thread count.

template <typename Real>
BasicTensor<Real> conv2d(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                         const BasicTensor<Real>* bias, ConvMode mode);
template <typename Real>
BasicTensor<Real> conv2d_grad_input(const BasicTensor<Real>& grad_out,
                                    const BasicTensor<Real>& weight, ConvMode mode,
                                    const Shape& input_shape);
template <typename Real>
BasicTensor<Real> conv2d_grad_weight(const BasicTensor<Real>& x, const BasicTensor<Real>& grad_out,
                                     ConvMode mode, const Shape& weight_shape);
/// Sum of grad_out over batch and space, shape (1, C, 1, 1).
template <typename Real>
BasicTensor<Real> conv2d_grad_bias(const BasicTensor<Real>& grad_out);

template <typename Real>
struct PoolResult {
  BasicTensor<Real> out;
  /// Flat input index of the selected entry per output, first maximum in
  /// row-major block order.
  std::vector<std::size_t> argmax;
};

template <typename Real>
PoolResult<Real> maxpool2(const BasicTensor<Real>& x);
template <typename Real>
BasicTensor<Real> maxpool2_grad(const BasicTensor<Real>& grad_out,
                                const std::vector<std::size_t>& argmax, const Shape& input_shape);

template <typename Real>
BasicTensor<Real> global_avg(const BasicTensor<Real>& x);
template <typename Real>
BasicTensor<Real> global_avg_grad(const BasicTensor<Real>& grad_out, const Shape& input_shape);

/// Population standard deviation over H x W per (b, c).
template <typename Real>
BasicTensor<Real> channel_std(const BasicTensor<Real>& x);
template <typename Real>
BasicTensor<Real> channel_std_grad(const BasicTensor<Real>& x, const BasicTensor<Real>& std_out,
                                   const BasicTensor<Real>& grad_out);

template <typename Real>
BasicTensor<Real> upsample_nearest(const BasicTensor<Real>& x, int target_h, int target_w);
template <typename Real>
BasicTensor<Real> upsample_nearest_grad(const BasicTensor<Real>& grad_out, const Shape& input_shape);

/// Orthonormal DCT-II matrix, row k = basis function k, size n x n row-major.
std::vector<double> dct_matrix(int n);

/// Separable orthonormal 2D DCT-II per (b, c) plane.
template <typename Real>
BasicTensor<Real> dct2(const BasicTensor<Real>& x);
/// Inverse of dct2 (orthonormal DCT-III).
template <typename Real>
BasicTensor<Real> idct2(const BasicTensor<Real>& coeffs);

}  // namespace kernels

/// Serial reference implementations kept for testing the parallel kernels.
/// Written for clarity, not speed.
namespace reference {

template <typename Real>
BasicTensor<Real> conv2d(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                         const BasicTensor<Real>* bias, ConvMode mode);
template <typename Real>
BasicTensor<Real> maxpool2(const BasicTensor<Real>& x);
template <typename Real>
BasicTensor<Real> global_avg(const BasicTensor<Real>& x);
template <typename Real>
BasicTensor<Real> channel_std(const BasicTensor<Real>& x);
/// Direct O(N^4) evaluation of the type-II definition.
template <typename Real>
BasicTensor<Real> dct2(const BasicTensor<Real>& x);
/// Direct O(N^4) evaluation of the inverse.
template <typename Real>
BasicTensor<Real> idct2(const BasicTensor<Real>& coeffs);

}  // namespace reference

}  // namespace plume
