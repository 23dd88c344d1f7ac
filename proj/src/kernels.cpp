#include "plume/kernels.hpp"

#include <cmath>
#include <string>

namespace plume {

const char* to_string(ConvMode mode) {
  switch (mode) {
    case ConvMode::depthwise: return "depthwise";
    case ConvMode::pointwise: return "pointwise";
    case ConvMode::dense: return "dense";
  }
  return "unknown";
}

namespace {

void check_conv(const Shape& x, const Shape& w, ConvMode mode) {
  if (w.height != w.width)
    throw ShapeError("conv2d: kernel must be square, got height " + std::to_string(w.height) +
                     " width " + std::to_string(w.width));
  if (w.height % 2 == 0)
    throw ShapeError("conv2d: kernel height axis must be odd, got " + std::to_string(w.height));
  switch (mode) {
    case ConvMode::depthwise:
      if (w.channels != 1)
        throw ShapeError("conv2d: depthwise weight channel axis must be 1, got " +
                         std::to_string(w.channels));
      if (w.batch != x.channels)
        throw ShapeError("conv2d: channel axis mismatch, input has " + std::to_string(x.channels) +
                         " channels but depthwise weight has " + std::to_string(w.batch) +
                         " filters");
      break;
    case ConvMode::pointwise:
      if (w.height != 1)
        throw ShapeError("conv2d: pointwise kernel height axis must be 1, got " +
                         std::to_string(w.height));
      [[fallthrough]];
    case ConvMode::dense:
      if (w.channels != x.channels)
        throw ShapeError("conv2d: channel axis mismatch, input has " + std::to_string(x.channels) +
                         " channels but weight expects " + std::to_string(w.channels));
      break;
  }
}

Shape conv_out_shape(const Shape& x, const Shape& w) {
  return Shape{x.batch, w.batch, x.height, x.width};
}

// acc[i][j] += wv * src[i + du][j + dv] over the valid range.
template <typename Real>
inline void accumulate_shifted(std::vector<double>& acc, std::span<const Real> src, int H, int W,
                               int du, int dv, double wv) {
  const int i0 = std::max(0, -du), i1 = std::min(H, H - du);
  const int j0 = std::max(0, -dv), j1 = std::min(W, W - dv);
  for (int i = i0; i < i1; ++i) {
    const Real* s = src.data() + static_cast<std::size_t>(i + du) * W + dv;
    double* a = acc.data() + static_cast<std::size_t>(i) * W;
    for (int j = j0; j < j1; ++j) a[j] += wv * static_cast<double>(s[j]);
  }
}

}  // namespace

template <typename Real>
void KernelWeights<Real>::validate(int input_channels) const {
  check_conv(Shape{1, input_channels, 1, 1}, weight.shape(), mode);
  if (bias && bias->shape() != Shape{1, out_channels(), 1, 1})
    throw ShapeError("conv2d: bias must be (1," + std::to_string(out_channels()) + ",1,1), got " +
                     bias->shape().str());
}

template <typename Real>
KernelWeights<Real> KernelWeights<Real>::init(ConvMode mode, int in_channels, int out_channels,
                                              int k, bool with_bias, Prng& rng) {
  KernelWeights kw;
  kw.mode = mode;
  if (mode == ConvMode::pointwise) k = 1;
  int fan_in = 0;
  Shape ws;
  if (mode == ConvMode::depthwise) {
    ws = Shape{in_channels, 1, k, k};
    fan_in = k * k;
  } else {
    ws = Shape{out_channels, in_channels, k, k};
    fan_in = in_channels * k * k;
  }
  kw.weight = fan_in_uniform<Real>(ws, fan_in, rng);
  if (with_bias)
    kw.bias = fan_in_uniform<Real>(Shape{1, ws.batch, 1, 1}, fan_in, rng);
  return kw;
}

template <typename Real>
KernelWeights<Real> KernelWeights<Real>::identity(int channels) {
  KernelWeights kw;
  kw.mode = ConvMode::pointwise;
  kw.weight = BasicTensor<Real>(Shape{channels, channels, 1, 1});
  for (int c = 0; c < channels; ++c) kw.weight.at(c, c, 0, 0) = Real(1);
  kw.bias = BasicTensor<Real>(Shape{1, channels, 1, 1});
  return kw;
}

template struct KernelWeights<float>;
template struct KernelWeights<double>;

namespace kernels {

template <typename Real>
BasicTensor<Real> conv2d(const BasicTensor<Real>& x, const BasicTensor<Real>& weight,
                         const BasicTensor<Real>* bias, ConvMode mode) {
  check_conv(x.shape(), weight.shape(), mode);
  const Shape os = conv_out_shape(x.shape(), weight.shape());
  if (bias && bias->shape() != Shape{1, os.channels, 1, 1})
    throw ShapeError("conv2d: bias channel axis must match " + std::to_string(os.channels) +
                     " output channels, got " + bias->shape().str());
  BasicTensor<Real> y(os);
  const int H = os.height, W = os.width, K = weight.height(), r = K / 2;
  const int B = os.batch, O = os.channels, C = x.channels();

#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < B; ++b) {
    for (int o = 0; o < O; ++o) {
      std::vector<double> acc(os.plane(), bias ? static_cast<double>((*bias)[o]) : 0.0);
      const int c_begin = mode == ConvMode::depthwise ? o : 0;
      const int c_end = mode == ConvMode::depthwise ? o + 1 : C;
      for (int c = c_begin; c < c_end; ++c) {
        const int wc = mode == ConvMode::depthwise ? 0 : c;
        for (int u = 0; u < K; ++u)
          for (int v = 0; v < K; ++v)
            accumulate_shifted(acc, x.plane(b, c), H, W, u - r, v - r,
                               static_cast<double>(weight.at(o, wc, u, v)));
      }
      auto out = y.plane(b, o);
      for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<Real>(acc[i]);
    }
  }
  return y;
}

template <typename Real>
BasicTensor<Real> conv2d_grad_input(const BasicTensor<Real>& grad_out,
                                    const BasicTensor<Real>& weight, ConvMode mode,
                                    const Shape& input_shape) {
  check_conv(input_shape, weight.shape(), mode);
  require_same_shape(grad_out.shape(), conv_out_shape(input_shape, weight.shape()),
                     "conv2d vjp cotangent");
  BasicTensor<Real> gx(input_shape);
  const int H = input_shape.height, W = input_shape.width, K = weight.height(), r = K / 2;
  const int B = input_shape.batch, C = input_shape.channels, O = grad_out.channels();

#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      std::vector<double> acc(input_shape.plane(), 0.0);
      const int o_begin = mode == ConvMode::depthwise ? c : 0;
      const int o_end = mode == ConvMode::depthwise ? c + 1 : O;
      for (int o = o_begin; o < o_end; ++o) {
        const int wc = mode == ConvMode::depthwise ? 0 : c;
        // gx[i][j] += w[u][v] * gy[i - (u - r)][j - (v - r)]
        for (int u = 0; u < K; ++u)
          for (int v = 0; v < K; ++v)
            accumulate_shifted(acc, grad_out.plane(b, o), H, W, r - u, r - v,
                               static_cast<double>(weight.at(o, wc, u, v)));
      }
      auto out = gx.plane(b, c);
      for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<Real>(acc[i]);
    }
  }
  return gx;
}

template <typename Real>
BasicTensor<Real> conv2d_grad_weight(const BasicTensor<Real>& x, const BasicTensor<Real>& grad_out,
                                     ConvMode mode, const Shape& weight_shape) {
  check_conv(x.shape(), weight_shape, mode);
  require_same_shape(grad_out.shape(), conv_out_shape(x.shape(), weight_shape),
                     "conv2d vjp cotangent");
  BasicTensor<Real> gw(weight_shape);
  const int H = x.height(), W = x.width(), K = weight_shape.height, r = K / 2;
  const int B = x.batch(), O = weight_shape.batch, WC = weight_shape.channels;

#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < O; ++o) {
    for (int wc = 0; wc < WC; ++wc) {
      const int c = mode == ConvMode::depthwise ? o : wc;
      for (int u = 0; u < K; ++u) {
        for (int v = 0; v < K; ++v) {
          const int du = u - r, dv = v - r;
          const int i0 = std::max(0, -du), i1 = std::min(H, H - du);
          const int j0 = std::max(0, -dv), j1 = std::min(W, W - dv);
          double acc = 0.0;
          for (int b = 0; b < B; ++b) {
            auto gy = grad_out.plane(b, o);
            auto xs = x.plane(b, c);
            for (int i = i0; i < i1; ++i)
              for (int j = j0; j < j1; ++j)
                acc += static_cast<double>(gy[static_cast<std::size_t>(i) * W + j]) *
                       static_cast<double>(xs[static_cast<std::size_t>(i + du) * W + j + dv]);
          }
          gw.at(o, wc, u, v) = static_cast<Real>(acc);
        }
      }
    }
  }
  return gw;
}

template <typename Real>
BasicTensor<Real> conv2d_grad_bias(const BasicTensor<Real>& grad_out) {
  BasicTensor<Real> gb(Shape{1, grad_out.channels(), 1, 1});
  for (int o = 0; o < grad_out.channels(); ++o) {
    double acc = 0.0;
    for (int b = 0; b < grad_out.batch(); ++b)
      for (Real v : grad_out.plane(b, o)) acc += v;
    gb[o] = static_cast<Real>(acc);
  }
  return gb;
}

template <typename Real>
PoolResult<Real> maxpool2(const BasicTensor<Real>& x) {
  if (x.height() < 2 || x.width() < 2)
    throw ShapeError("pool underflow: maxpool2 needs height and width >= 2, got " + x.shape().str());
  const Shape os{x.batch(), x.channels(), x.height() / 2, x.width() / 2};
  PoolResult<Real> res{BasicTensor<Real>(os), std::vector<std::size_t>(os.numel())};
  const int planes = os.batch * os.channels;

#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const int b = p / os.channels, c = p % os.channels;
    for (int i = 0; i < os.height; ++i) {
      for (int j = 0; j < os.width; ++j) {
        std::size_t best = x.index(b, c, 2 * i, 2 * j);
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj) {
            const std::size_t idx = x.index(b, c, 2 * i + di, 2 * j + dj);
            if (x[idx] > x[best]) best = idx;
          }
        const std::size_t o = res.out.index(b, c, i, j);
        res.out[o] = x[best];
        res.argmax[o] = best;
      }
    }
  }
  return res;
}

template <typename Real>
BasicTensor<Real> maxpool2_grad(const BasicTensor<Real>& grad_out,
                                const std::vector<std::size_t>& argmax, const Shape& input_shape) {
  if (argmax.size() != grad_out.size())
    throw ShapeError("maxpool2 vjp: cotangent shape " + grad_out.shape().str() +
                     " does not match pooled output");
  BasicTensor<Real> gx(input_shape);
  // Blocks are disjoint, so each input receives at most one contribution.
  for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += grad_out[o];
  return gx;
}

template <typename Real>
BasicTensor<Real> global_avg(const BasicTensor<Real>& x) {
  BasicTensor<Real> y(Shape{x.batch(), x.channels(), 1, 1});
  const int planes = x.batch() * x.channels();
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    double acc = 0.0;
    for (Real v : x.plane(p / x.channels(), p % x.channels())) acc += v;
    y[p] = static_cast<Real>(acc / static_cast<double>(x.shape().plane()));
  }
  return y;
}

template <typename Real>
BasicTensor<Real> global_avg_grad(const BasicTensor<Real>& grad_out, const Shape& input_shape) {
  require_same_shape(grad_out.shape(), Shape{input_shape.batch, input_shape.channels, 1, 1},
                     "global_avg vjp cotangent");
  BasicTensor<Real> gx(input_shape);
  const double inv = 1.0 / static_cast<double>(input_shape.plane());
  for (int b = 0; b < input_shape.batch; ++b)
    for (int c = 0; c < input_shape.channels; ++c) {
      const Real g = static_cast<Real>(grad_out.at(b, c, 0, 0) * inv);
      for (auto& v : gx.plane(b, c)) v = g;
    }
  return gx;
}

template <typename Real>
BasicTensor<Real> channel_std(const BasicTensor<Real>& x) {
  BasicTensor<Real> y(Shape{x.batch(), x.channels(), 1, 1});
  const int planes = x.batch() * x.channels();
  const double n = static_cast<double>(x.shape().plane());
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    auto plane = x.plane(p / x.channels(), p % x.channels());
    double mean = 0.0;
    for (Real v : plane) mean += v;
    mean /= n;
    double ss = 0.0;
    for (Real v : plane) ss += (v - mean) * (v - mean);
    y[p] = static_cast<Real>(std::sqrt(ss / n));
  }
  return y;
}

template <typename Real>
BasicTensor<Real> channel_std_grad(const BasicTensor<Real>& x, const BasicTensor<Real>& std_out,
                                   const BasicTensor<Real>& grad_out) {
  require_same_shape(grad_out.shape(), std_out.shape(), "channel_std vjp cotangent");
  BasicTensor<Real> gx(x.shape());
  const double n = static_cast<double>(x.shape().plane());
  for (int b = 0; b < x.batch(); ++b)
    for (int c = 0; c < x.channels(); ++c) {
      const double s = std_out.at(b, c, 0, 0);
      if (s == 0.0) continue;  // subgradient 0 at a constant plane
      auto plane = x.plane(b, c);
      double mean = 0.0;
      for (Real v : plane) mean += v;
      mean /= n;
      const double scale = grad_out.at(b, c, 0, 0) / (n * s);
      auto g = gx.plane(b, c);
      for (std::size_t i = 0; i < plane.size(); ++i)
        g[i] = static_cast<Real>((plane[i] - mean) * scale);
    }
  return gx;
}

template <typename Real>
BasicTensor<Real> upsample_nearest(const BasicTensor<Real>& x, int target_h, int target_w) {
  if (target_h < x.height())
    throw ShapeError("upsample_nearest: target height " + std::to_string(target_h) +
                     " smaller than source " + std::to_string(x.height()));
  if (target_w < x.width())
    throw ShapeError("upsample_nearest: target width " + std::to_string(target_w) +
                     " smaller than source " + std::to_string(x.width()));
  BasicTensor<Real> y(Shape{x.batch(), x.channels(), target_h, target_w});
  const int planes = x.batch() * x.channels();
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const int b = p / x.channels(), c = p % x.channels();
    for (int i = 0; i < target_h; ++i) {
      const int si = static_cast<int>(static_cast<long long>(i) * x.height() / target_h);
      for (int j = 0; j < target_w; ++j) {
        const int sj = static_cast<int>(static_cast<long long>(j) * x.width() / target_w);
        y.at(b, c, i, j) = x.at(b, c, si, sj);
      }
    }
  }
  return y;
}

template <typename Real>
BasicTensor<Real> upsample_nearest_grad(const BasicTensor<Real>& grad_out, const Shape& input_shape) {
  if (grad_out.batch() != input_shape.batch || grad_out.channels() != input_shape.channels)
    throw ShapeError("upsample_nearest vjp: cotangent " + grad_out.shape().str() +
                     " incompatible with input " + input_shape.str());
  BasicTensor<Real> gx(input_shape);
  const int th = grad_out.height(), tw = grad_out.width();
  for (int b = 0; b < input_shape.batch; ++b)
    for (int c = 0; c < input_shape.channels; ++c) {
      std::vector<double> acc(input_shape.plane(), 0.0);
      for (int i = 0; i < th; ++i) {
        const int si = static_cast<int>(static_cast<long long>(i) * input_shape.height / th);
        for (int j = 0; j < tw; ++j) {
          const int sj = static_cast<int>(static_cast<long long>(j) * input_shape.width / tw);
          acc[static_cast<std::size_t>(si) * input_shape.width + sj] += grad_out.at(b, c, i, j);
        }
      }
      auto g = gx.plane(b, c);
      for (std::size_t i = 0; i < acc.size(); ++i) g[i] = static_cast<Real>(acc[i]);
    }
  return gx;
}

std::vector<double> dct_matrix(int n) {
  std::vector<double> m(static_cast<std::size_t>(n) * n);
  const double s0 = std::sqrt(1.0 / n), s = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      m[static_cast<std::size_t>(k) * n + i] =
          (k == 0 ? s0 : s) * std::cos(M_PI * (2.0 * i + 1.0) * k / (2.0 * n));
  return m;
}

namespace {

// inverse == false: Y = Ch * X * Cw^T.  inverse == true: X = Ch^T * Y * Cw.
template <typename Real>
BasicTensor<Real> dct2_impl(const BasicTensor<Real>& x, bool inverse) {
  const int H = x.height(), W = x.width();
  const std::vector<double> ch = dct_matrix(H), cw = dct_matrix(W);
  BasicTensor<Real> y(x.shape());
  const int planes = x.batch() * x.channels();

#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const int b = p / x.channels(), c = p % x.channels();
    auto src = x.plane(b, c);
    std::vector<double> tmp(static_cast<std::size_t>(H) * W, 0.0);
    // rows
    for (int i = 0; i < H; ++i)
      for (int k = 0; k < W; ++k) {
        double acc = 0.0;
        for (int j = 0; j < W; ++j) {
          const double m = inverse ? cw[static_cast<std::size_t>(j) * W + k]
                                   : cw[static_cast<std::size_t>(k) * W + j];
          acc += m * src[static_cast<std::size_t>(i) * W + j];
        }
        tmp[static_cast<std::size_t>(i) * W + k] = acc;
      }
    // columns
    auto dst = y.plane(b, c);
    for (int k = 0; k < H; ++k)
      for (int j = 0; j < W; ++j) {
        double acc = 0.0;
        for (int i = 0; i < H; ++i) {
          const double m = inverse ? ch[static_cast<std::size_t>(i) * H + k]
                                   : ch[static_cast<std::size_t>(k) * H + i];
          acc += m * tmp[static_cast<std::size_t>(i) * W + j];
        }
        dst[static_cast<std::size_t>(k) * W + j] = static_cast<Real>(acc);
      }
  }
  return y;
}

}  // namespace

template <typename Real>
BasicTensor<Real> dct2(const BasicTensor<Real>& x) {
  return dct2_impl(x, false);
}

template <typename Real>
BasicTensor<Real> idct2(const BasicTensor<Real>& coeffs) {
  return dct2_impl(coeffs, true);
}

#define PLUME_INSTANTIATE_KERNELS(R)                                                            \
  template BasicTensor<R> conv2d(const BasicTensor<R>&, const BasicTensor<R>&,                  \
                                 const BasicTensor<R>*, ConvMode);                              \
  template BasicTensor<R> conv2d_grad_input(const BasicTensor<R>&, const BasicTensor<R>&,       \
                                            ConvMode, const Shape&);                            \
  template BasicTensor<R> conv2d_grad_weight(const BasicTensor<R>&, const BasicTensor<R>&,      \
                                             ConvMode, const Shape&);                           \
  template BasicTensor<R> conv2d_grad_bias(const BasicTensor<R>&);                              \
  template PoolResult<R> maxpool2(const BasicTensor<R>&);                                       \
  template BasicTensor<R> maxpool2_grad(const BasicTensor<R>&, const std::vector<std::size_t>&, \
                                        const Shape&);                                          \
  template BasicTensor<R> global_avg(const BasicTensor<R>&);                                    \
  template BasicTensor<R> global_avg_grad(const BasicTensor<R>&, const Shape&);                 \
  template BasicTensor<R> channel_std(const BasicTensor<R>&);                                   \
  template BasicTensor<R> channel_std_grad(const BasicTensor<R>&, const BasicTensor<R>&,        \
                                           const BasicTensor<R>&);                              \
  template BasicTensor<R> upsample_nearest(const BasicTensor<R>&, int, int);                    \
  template BasicTensor<R> upsample_nearest_grad(const BasicTensor<R>&, const Shape&);           \
  template BasicTensor<R> dct2(const BasicTensor<R>&);                                          \
  template BasicTensor<R> idct2(const BasicTensor<R>&);

PLUME_INSTANTIATE_KERNELS(float)
PLUME_INSTANTIATE_KERNELS(double)

#undef PLUME_INSTANTIATE_KERNELS

}  // namespace kernels
}  // namespace plume
