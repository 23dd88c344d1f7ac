#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "plume/analysis.hpp"
#include "plume/prng.hpp"
#include "plume/tensor.hpp"

namespace testing {

using plume::Shape;
using plume::Tensor;
using plume::TensorD;

template <typename Real = float>
plume::BasicTensor<Real> random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  plume::Prng rng(seed);
  return plume::uniform_tensor<Real>(s, rng, lo, hi);
}

inline TensorD normal_tensor(Shape s, std::uint64_t seed, double scale = 1.0) {
  plume::Prng rng(seed);
  TensorD t(s);
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

template <typename A, typename B>
double max_abs_diff(const A& a, const B& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

template <typename A, typename B>
bool bitwise_equal(const A& a, const B& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i] == b[i]) || std::signbit(a[i]) != std::signbit(b[i])) return false;
  return true;
}

// Correlation with zero padding, written directly from the definition.
template <typename Real>
plume::BasicTensor<Real> brute_conv(const plume::BasicTensor<Real>& x, const plume::BasicTensor<Real>& w,
                                    const plume::BasicTensor<Real>* bias, bool depthwise) {
  const int B = x.batch(), C = x.channels(), H = x.height(), W = x.width();
  const int O = w.batch(), k = w.height(), r = k / 2;
  plume::BasicTensor<Real> out(Shape{B, O, H, W});
  for (int b = 0; b < B; ++b)
    for (int o = 0; o < O; ++o)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double s = bias ? (*bias)[o] : 0.0;
          for (int c = 0; c < (depthwise ? 1 : C); ++c)
            for (int di = 0; di < k; ++di)
              for (int dj = 0; dj < k; ++dj) {
                const int y = i + di - r, z = j + dj - r;
                if (y < 0 || y >= H || z < 0 || z >= W) continue;
                s += static_cast<double>(w.at(o, c, di, dj)) * x.at(b, depthwise ? o : c, y, z);
              }
          out.at(b, o, i, j) = static_cast<Real>(s);
        }
  return out;
}

// Type-II orthonormal DCT straight from the cosine sum.
inline std::vector<double> naive_dct2(const std::vector<double>& x, int H, int W) {
  std::vector<double> f(static_cast<std::size_t>(H) * W);
  for (int u = 0; u < H; ++u)
    for (int v = 0; v < W; ++v) {
      double s = 0.0;
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j)
          s += x[i * W + j] * std::cos(M_PI * (2 * i + 1) * u / (2.0 * H)) *
               std::cos(M_PI * (2 * j + 1) * v / (2.0 * W));
      const double au = u == 0 ? std::sqrt(1.0 / H) : std::sqrt(2.0 / H);
      const double av = v == 0 ? std::sqrt(1.0 / W) : std::sqrt(2.0 / W);
      f[u * W + v] = au * av * s;
    }
  return f;
}

inline std::vector<double> naive_idct2(const std::vector<double>& f, int H, int W) {
  std::vector<double> x(static_cast<std::size_t>(H) * W);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      double s = 0.0;
      for (int u = 0; u < H; ++u)
        for (int v = 0; v < W; ++v) {
          const double au = u == 0 ? std::sqrt(1.0 / H) : std::sqrt(2.0 / H);
          const double av = v == 0 ? std::sqrt(1.0 / W) : std::sqrt(2.0 / W);
          s += au * av * f[u * W + v] * std::cos(M_PI * (2 * i + 1) * u / (2.0 * H)) *
               std::cos(M_PI * (2 * j + 1) * v / (2.0 * W));
        }
      x[i * W + j] = s;
    }
  return x;
}

// Block maxima by exhaustive enumeration.
template <typename Real>
plume::BasicTensor<Real> block_max(const plume::BasicTensor<Real>& x) {
  const Shape s = x.shape();
  plume::BasicTensor<Real> out(Shape{s.batch, s.channels, s.height / 2, s.width / 2});
  for (int b = 0; b < s.batch; ++b)
    for (int c = 0; c < s.channels; ++c)
      for (int i = 0; i < s.height / 2; ++i)
        for (int j = 0; j < s.width / 2; ++j) {
          Real m = x.at(b, c, 2 * i, 2 * j);
          for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj) m = std::max(m, x.at(b, c, 2 * i + di, 2 * j + dj));
          out.at(b, c, i, j) = m;
        }
  return out;
}

}  // namespace testing
