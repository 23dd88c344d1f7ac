#include <cmath>

#include "plume/kernels.hpp"

namespace plume::reference {

template <typename Real>
BasicTensor<Real> conv2d(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                         const BasicTensor<Real>* bias, ConvMode mode) {
  const int K = weight.height(), r = K / 2;
  const int O = weight.batch();
  BasicTensor<Real> y(Shape{x.batch(), O, x.height(), x.width()});
  for (int b = 0; b < x.batch(); ++b)
    for (int o = 0; o < O; ++o)
      for (int i = 0; i < x.height(); ++i)
        for (int j = 0; j < x.width(); ++j) {
          double acc = bias ? static_cast<double>((*bias)[o]) : 0.0;
          for (int c = 0; c < x.channels(); ++c) {
            if (mode == ConvMode::depthwise && c != o) continue;
            const int wc = mode == ConvMode::depthwise ? 0 : c;
            for (int u = 0; u < K; ++u)
              for (int v = 0; v < K; ++v) {
                const int si = i + u - r, sj = j + v - r;
                if (si < 0 || sj < 0 || si >= x.height() || sj >= x.width()) continue;
                acc += static_cast<double>(weight.at(o, wc, u, v)) * x.at(b, c, si, sj);
              }
          }
          y.at(b, o, i, j) = static_cast<Real>(acc);
        }
  return y;
}

template <typename Real>
BasicTensor<Real> maxpool2(const BasicTensor<Real>& x) {
  BasicTensor<Real> y(Shape{x.batch(), x.channels(), x.height() / 2, x.width() / 2});
  for (int b = 0; b < y.batch(); ++b)
    for (int c = 0; c < y.channels(); ++c)
      for (int i = 0; i < y.height(); ++i)
        for (int j = 0; j < y.width(); ++j)
          y.at(b, c, i, j) = std::max({x.at(b, c, 2 * i, 2 * j), x.at(b, c, 2 * i, 2 * j + 1),
                                       x.at(b, c, 2 * i + 1, 2 * j), x.at(b, c, 2 * i + 1, 2 * j + 1)});
  return y;
}

template <typename Real>
BasicTensor<Real> global_avg(const BasicTensor<Real>& x) {
  BasicTensor<Real> y(Shape{x.batch(), x.channels(), 1, 1});
  for (int b = 0; b < x.batch(); ++b)
    for (int c = 0; c < x.channels(); ++c) {
      double s = 0.0;
      for (int i = 0; i < x.height(); ++i)
        for (int j = 0; j < x.width(); ++j) s += x.at(b, c, i, j);
      y.at(b, c, 0, 0) = static_cast<Real>(s / (x.height() * x.width()));
    }
  return y;
}

template <typename Real>
BasicTensor<Real> channel_std(const BasicTensor<Real>& x) {
  BasicTensor<Real> y(Shape{x.batch(), x.channels(), 1, 1});
  for (int b = 0; b < x.batch(); ++b)
    for (int c = 0; c < x.channels(); ++c) {
      double m = 0.0;
      for (int i = 0; i < x.height(); ++i)
        for (int j = 0; j < x.width(); ++j) m += x.at(b, c, i, j);
      m /= x.height() * x.width();
      double s = 0.0;
      for (int i = 0; i < x.height(); ++i)
        for (int j = 0; j < x.width(); ++j) s += (x.at(b, c, i, j) - m) * (x.at(b, c, i, j) - m);
      y.at(b, c, 0, 0) = static_cast<Real>(std::sqrt(s / (x.height() * x.width())));
    }
  return y;
}

namespace {

double dct_basis(int k, int n, int N) {
  const double scale = k == 0 ? std::sqrt(1.0 / N) : std::sqrt(2.0 / N);
  return scale * std::cos(M_PI * (2 * n + 1) * k / (2.0 * N));
}

}  // namespace

template <typename Real>
BasicTensor<Real> dct2(const BasicTensor<Real>& x) {
  const int H = x.height(), W = x.width();
  BasicTensor<Real> f(x.shape());
  for (int b = 0; b < x.batch(); ++b)
    for (int c = 0; c < x.channels(); ++c)
      for (int ky = 0; ky < H; ++ky)
        for (int kx = 0; kx < W; ++kx) {
          double s = 0.0;
          for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j)
              s += x.at(b, c, i, j) * dct_basis(ky, i, H) * dct_basis(kx, j, W);
          f.at(b, c, ky, kx) = static_cast<Real>(s);
        }
  return f;
}

template <typename Real>
BasicTensor<Real> idct2(const BasicTensor<Real>& coeffs) {
  const int H = coeffs.height(), W = coeffs.width();
  BasicTensor<Real> x(coeffs.shape());
  for (int b = 0; b < x.batch(); ++b)
    for (int c = 0; c < x.channels(); ++c)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double s = 0.0;
          for (int ky = 0; ky < H; ++ky)
            for (int kx = 0; kx < W; ++kx)
              s += coeffs.at(b, c, ky, kx) * dct_basis(ky, i, H) * dct_basis(kx, j, W);
          x.at(b, c, i, j) = static_cast<Real>(s);
        }
  return x;
}

#define PLUME_INSTANTIATE_REFERENCE(R)                                            \
  template BasicTensor<R> conv2d(const BasicTensor<R>&, const BasicTensor<R>&,    \
                                 const BasicTensor<R>*, ConvMode);                \
  template BasicTensor<R> maxpool2(const BasicTensor<R>&);                        \
  template BasicTensor<R> global_avg(const BasicTensor<R>&);                      \
  template BasicTensor<R> channel_std(const BasicTensor<R>&);                     \
  template BasicTensor<R> dct2(const BasicTensor<R>&);                            \
  template BasicTensor<R> idct2(const BasicTensor<R>&);

PLUME_INSTANTIATE_REFERENCE(float)
PLUME_INSTANTIATE_REFERENCE(double)

#undef PLUME_INSTANTIATE_REFERENCE

}  // namespace plume::reference
