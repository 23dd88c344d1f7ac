#include "plume/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace plume::ad {

namespace {

template <typename Real>
using T = BasicTensor<Real>;

template <typename Real>
using Inputs = typename TapeNode<Real>::Inputs;

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t bcast_index(const Shape& s, int b, int c, int h, int w) {
  const int bb = s.batch == 1 ? 0 : b, cc = s.channels == 1 ? 0 : c;
  const int hh = s.height == 1 ? 0 : h, ww = s.width == 1 ? 0 : w;
  return ((static_cast<std::size_t>(bb) * s.channels + cc) * s.height + hh) * s.width + ww;
}

// out[i] = f(a[ia], b[ib]) over the broadcast shape.
template <typename Real, typename F>
T<Real> broadcast_map(const T<Real>& a, const T<Real>& b, F f) {
  const Shape os = broadcast_shape(a.shape(), b.shape());
  T<Real> out(os);
  std::size_t k = 0;
  for (int bi = 0; bi < os.batch; ++bi)
    for (int c = 0; c < os.channels; ++c)
      for (int h = 0; h < os.height; ++h)
        for (int w = 0; w < os.width; ++w, ++k)
          out[k] = static_cast<Real>(f(static_cast<double>(a[bcast_index(a.shape(), bi, c, h, w)]),
                                       static_cast<double>(b[bcast_index(b.shape(), bi, c, h, w)])));
  return out;
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  auto axis = [&](int x, int y, const char* name) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw ShapeError(std::string("broadcast: ") + name + " axis mismatch " + a.str() + " vs " +
                     b.str());
  };
  return Shape{axis(a.batch, b.batch, "batch"), axis(a.channels, b.channels, "channel"),
               axis(a.height, b.height, "height"), axis(a.width, b.width, "width")};
}

template <typename Real>
BasicTensor<Real> reduce_to(const BasicTensor<Real>& t, const Shape& target) {
  if (t.shape() == target) return t;
  const Shape& s = t.shape();
  std::vector<double> acc(target.numel(), 0.0);
  std::size_t k = 0;
  for (int b = 0; b < s.batch; ++b)
    for (int c = 0; c < s.channels; ++c)
      for (int h = 0; h < s.height; ++h)
        for (int w = 0; w < s.width; ++w, ++k) acc[bcast_index(target, b, c, h, w)] += t[k];
  return BasicTensor<Real>(target, std::vector<Real>(acc.begin(), acc.end()));
}

template <typename Real>
ConvVars<Real> bind(Tape<Real>& tape, const KernelWeights<Real>& kw, const std::string& name) {
  ConvVars<Real> cv;
  cv.mode = kw.mode;
  cv.weight = tape.leaf(kw.weight, name + ".weight");
  if (kw.bias) cv.bias = tape.leaf(*kw.bias, name + ".bias");
  return cv;
}

template <typename Real>
Var<Real> conv2d(Var<Real> x, const ConvVars<Real>& w) {
  const ConvMode mode = w.mode;
  std::vector<Var<Real>> inputs{x, w.weight};
  const bool has_bias = w.bias.has_value();
  if (has_bias) inputs.push_back(*w.bias);
  return x.tape->record(
      std::string("conv2d.") + to_string(mode), inputs,
      [mode, has_bias](const Inputs<Real>& in) {
        return kernels::conv2d(*in[0], *in[1], has_bias ? in[2] : nullptr, mode);
      },
      [mode, has_bias](const Inputs<Real>& in, const T<Real>&, const T<Real>& g) {
        std::vector<T<Real>> grads;
        grads.push_back(kernels::conv2d_grad_input(g, *in[1], mode, in[0]->shape()));
        grads.push_back(kernels::conv2d_grad_weight(*in[0], g, mode, in[1]->shape()));
        if (has_bias) grads.push_back(kernels::conv2d_grad_bias(g));
        return grads;
      });
}

template <typename Real>
Var<Real> maxpool2(Var<Real> x) {
  return x.tape->record(
      "maxpool2", {x}, [](const Inputs<Real>& in) { return kernels::maxpool2(*in[0]).out; },
      [](const Inputs<Real>& in, const T<Real>&, const T<Real>& g) {
        auto pooled = kernels::maxpool2(*in[0]);
        return std::vector<T<Real>>{kernels::maxpool2_grad(g, pooled.argmax, in[0]->shape())};
      });
}

template <typename Real>
Var<Real> global_avg(Var<Real> x) {
  return x.tape->record(
      "global_avg", {x}, [](const Inputs<Real>& in) { return kernels::global_avg(*in[0]); },
      [](const Inputs<Real>& in, const T<Real>&, const T<Real>& g) {
        return std::vector<T<Real>>{kernels::global_avg_grad(g, in[0]->shape())};
      });
}

template <typename Real>
Var<Real> channel_std(Var<Real> x) {
  return x.tape->record(
      "channel_std", {x}, [](const Inputs<Real>& in) { return kernels::channel_std(*in[0]); },
      [](const Inputs<Real>& in, const T<Real>& out, const T<Real>& g) {
        return std::vector<T<Real>>{kernels::channel_std_grad(*in[0], out, g)};
      });
}

template <typename Real>
Var<Real> upsample_nearest(Var<Real> x, int target_h, int target_w) {
  return x.tape->record(
      "upsample_nearest", {x},
      [target_h, target_w](const Inputs<Real>& in) {
        return kernels::upsample_nearest(*in[0], target_h, target_w);
      },
      [](const Inputs<Real>& in, const T<Real>&, const T<Real>& g) {
        return std::vector<T<Real>>{kernels::upsample_nearest_grad(g, in[0]->shape())};
      });
}

template <typename Real>
Var<Real> unary(Var<Real> x, Unary kind) {
  static const char* names[] = {"sigmoid", "relu", "silu", "abs", "exp_neg", "softplus"};
  auto f = [kind](double v) -> double {
    switch (kind) {
      case Unary::sigmoid: return stable_sigmoid(v);
      case Unary::relu: return v > 0 ? v : 0.0;
      case Unary::silu: return v * stable_sigmoid(v);
      case Unary::abs: return std::fabs(v);
      case Unary::exp_neg: return std::exp(-v);
      case Unary::softplus: return std::log1p(std::exp(-std::fabs(v))) + std::max(v, 0.0);
    }
    return 0.0;
  };
  // derivative given input v and output y
  auto df = [kind](double v, double y) -> double {
    switch (kind) {
      case Unary::sigmoid: return y * (1.0 - y);
      case Unary::relu: return v > 0 ? 1.0 : 0.0;
      case Unary::silu: {
        const double s = stable_sigmoid(v);
        return s + v * s * (1.0 - s);
      }
      case Unary::abs: return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
      case Unary::exp_neg: return -y;
      case Unary::softplus: return stable_sigmoid(v);
    }
    return 0.0;
  };
  return x.tape->record(
      names[static_cast<int>(kind)], {x},
      [f](const Inputs<Real>& in) {
        T<Real> y(in[0]->shape());
        auto src = in[0]->data();
        auto dst = y.data();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<Real>(f(src[i]));
        return y;
      },
      [df](const Inputs<Real>& in, const T<Real>& out, const T<Real>& g) {
        T<Real> gx(in[0]->shape());
        for (std::size_t i = 0; i < gx.size(); ++i)
          gx[i] = static_cast<Real>(g[i] * df((*in[0])[i], out[i]));
        return std::vector<T<Real>>{gx};
      });
}

template <typename Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
  return a.tape->record(
      "add", {a, b},
      [](const Inputs<Real>& in) {
        return broadcast_map(*in[0], *in[1], [](double x, double y) { return x + y; });
      },
      [](const Inputs<Real>& in, const T<Real>&, const T<Real>& g) {
        return std::vector<T<Real>>{reduce_to(g, in[0]->shape()), reduce_to(g, in[1]->shape())};
      });
}

template <typename Real>
Var<Real> sub(Var<Real> a, Var<Real> b) {
  return a.tape->record(
      "sub", {a, b},
      [](const Inputs<Real>& in) {
        return broadcast_map(*in[0], *in[1], [](double x, double y) { return x - y; });
      },
      [](const Inputs<Real>& in, const T<Real>&, const T<Real>& g) {
        T<Real> neg = g;
        for (auto& v : neg.data()) v = -v;
        return std::vector<T<Real>>{reduce_to(g, in[0]->shape()), reduce_to(neg, in[1]->shape())};
      });
}

template <typename Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
  return a.tape->record(
      "mul", {a, b},
      [](const Inputs<Real>& in) {
        return broadcast_map(*in[0], *in[1], [](double x, double y) { return x * y; });
      },
      [](const Inputs<Real>& in, const T<Real>&, const T<Real>& g) {
        auto ga = broadcast_map(g, *in[1], [](double gv, double y) { return gv * y; });
        auto gb = broadcast_map(g, *in[0], [](double gv, double x) { return gv * x; });
        return std::vector<T<Real>>{reduce_to(ga, in[0]->shape()), reduce_to(gb, in[1]->shape())};
      });
}

template <typename Real>
Var<Real> div(Var<Real> a, Var<Real> b) {
  return a.tape->record(
      "div", {a, b},
      [](const Inputs<Real>& in) {
        return broadcast_map(*in[0], *in[1], [](double x, double y) { return x / y; });
      },
      [](const Inputs<Real>& in, const T<Real>& out, const T<Real>& g) {
        auto ga = broadcast_map(g, *in[1], [](double gv, double y) { return gv / y; });
        // d(a/b)/db = -(a/b)/b
        auto q = broadcast_map(g, out, [](double gv, double o) { return -gv * o; });
        auto gb = broadcast_map(q, *in[1], [](double v, double y) { return v / y; });
        return std::vector<T<Real>>{reduce_to(ga, in[0]->shape()), reduce_to(gb, in[1]->shape())};
      });
}

template <typename Real>
Var<Real> scale(Var<Real> x, double s) {
  return x.tape->record(
      "scale", {x},
      [s](const Inputs<Real>& in) {
        T<Real> y = *in[0];
        for (auto& v : y.data()) v = static_cast<Real>(v * s);
        return y;
      },
      [s](const Inputs<Real>&, const T<Real>&, const T<Real>& g) {
        T<Real> gx = g;
        for (auto& v : gx.data()) v = static_cast<Real>(v * s);
        return std::vector<T<Real>>{gx};
      });
}

template <typename Real>
Var<Real> add_scalar(Var<Real> x, double s) {
  return x.tape->record(
      "add_scalar", {x},
      [s](const Inputs<Real>& in) {
        T<Real> y = *in[0];
        for (auto& v : y.data()) v = static_cast<Real>(v + s);
        return y;
      },
      [](const Inputs<Real>&, const T<Real>&, const T<Real>& g) { return std::vector<T<Real>>{g}; });
}

template <typename Real>
Var<Real> dct2(Var<Real> x) {
  // Orthonormal: the adjoint is the inverse.
  return x.tape->record(
      "dct2", {x}, [](const Inputs<Real>& in) { return kernels::dct2(*in[0]); },
      [](const Inputs<Real>&, const T<Real>&, const T<Real>& g) {
        return std::vector<T<Real>>{kernels::idct2(g)};
      });
}

template <typename Real>
Var<Real> idct2(Var<Real> x) {
  return x.tape->record(
      "idct2", {x}, [](const Inputs<Real>& in) { return kernels::idct2(*in[0]); },
      [](const Inputs<Real>&, const T<Real>&, const T<Real>& g) {
        return std::vector<T<Real>>{kernels::dct2(g)};
      });
}

template <typename Real>
Var<Real> slice_channels(Var<Real> x, int begin, int count) {
  const Shape s = x.shape();
  if (begin < 0 || count < 1 || begin + count > s.channels)
    throw ShapeError("slice_channels: channel range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + s.str());
  return x.tape->record(
      "slice_channels", {x},
      [begin, count](const Inputs<Real>& in) {
        const T<Real>& src = *in[0];
        T<Real> y(Shape{src.batch(), count, src.height(), src.width()});
        for (int b = 0; b < src.batch(); ++b)
          for (int c = 0; c < count; ++c) {
            auto from = src.plane(b, begin + c);
            std::copy(from.begin(), from.end(), y.plane(b, c).begin());
          }
        return y;
      },
      [begin, count](const Inputs<Real>& in, const T<Real>&, const T<Real>& g) {
        T<Real> gx(in[0]->shape());
        for (int b = 0; b < gx.batch(); ++b)
          for (int c = 0; c < count; ++c) {
            auto from = g.plane(b, c);
            std::copy(from.begin(), from.end(), gx.plane(b, begin + c).begin());
          }
        return std::vector<T<Real>>{gx};
      });
}

template <typename Real>
Var<Real> concat_channels(const std::vector<Var<Real>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape s0 = parts[0].shape();
  for (const auto& p : parts) {
    const Shape s = p.shape();
    if (s.batch != s0.batch || s.height != s0.height || s.width != s0.width)
      throw ShapeError("concat_channels: non-channel axis mismatch " + s.str() + " vs " + s0.str());
  }
  return parts[0].tape->record(
      "concat_channels", parts,
      [](const Inputs<Real>& in) {
        int total = 0;
        for (auto* t : in) total += t->channels();
        T<Real> y(Shape{in[0]->batch(), total, in[0]->height(), in[0]->width()});
        for (int b = 0; b < y.batch(); ++b) {
          int offset = 0;
          for (auto* t : in)
            for (int c = 0; c < t->channels(); ++c, ++offset) {
              auto from = t->plane(b, c);
              std::copy(from.begin(), from.end(), y.plane(b, offset).begin());
            }
        }
        return y;
      },
      [](const Inputs<Real>& in, const T<Real>&, const T<Real>& g) {
        std::vector<T<Real>> grads;
        int offset = 0;
        for (auto* t : in) {
          T<Real> gt(t->shape());
          for (int b = 0; b < gt.batch(); ++b)
            for (int c = 0; c < gt.channels(); ++c) {
              auto from = g.plane(b, offset + c);
              std::copy(from.begin(), from.end(), gt.plane(b, c).begin());
            }
          offset += t->channels();
          grads.push_back(std::move(gt));
        }
        return grads;
      });
}

template <typename Real>
Var<Real> channel_norm(Var<Real> x, double eps) {
  return x.tape->record(
      "channel_norm", {x},
      [eps](const Inputs<Real>& in) {
        const T<Real>& src = *in[0];
        T<Real> y(src.shape());
        const int C = src.channels();
        if (C == 1) return y;
        for (int b = 0; b < src.batch(); ++b)
          for (int h = 0; h < src.height(); ++h)
            for (int w = 0; w < src.width(); ++w) {
              double mean = 0.0, var = 0.0;
              for (int c = 0; c < C; ++c) mean += src.at(b, c, h, w);
              mean /= C;
              for (int c = 0; c < C; ++c) var += (src.at(b, c, h, w) - mean) * (src.at(b, c, h, w) - mean);
              const double inv = 1.0 / std::sqrt(var / C + eps);
              for (int c = 0; c < C; ++c)
                y.at(b, c, h, w) = static_cast<Real>((src.at(b, c, h, w) - mean) * inv);
            }
        return y;
      },
      [eps](const Inputs<Real>& in, const T<Real>& out, const T<Real>& g) {
        const T<Real>& src = *in[0];
        T<Real> gx(src.shape());
        const int C = src.channels();
        if (C == 1) return std::vector<T<Real>>{gx};
        for (int b = 0; b < src.batch(); ++b)
          for (int h = 0; h < src.height(); ++h)
            for (int w = 0; w < src.width(); ++w) {
              double mean = 0.0, var = 0.0;
              for (int c = 0; c < C; ++c) mean += src.at(b, c, h, w);
              mean /= C;
              for (int c = 0; c < C; ++c) var += (src.at(b, c, h, w) - mean) * (src.at(b, c, h, w) - mean);
              const double inv = 1.0 / std::sqrt(var / C + eps);
              double g_mean = 0.0, gy_mean = 0.0;
              for (int c = 0; c < C; ++c) {
                g_mean += g.at(b, c, h, w);
                gy_mean += static_cast<double>(g.at(b, c, h, w)) * out.at(b, c, h, w);
              }
              g_mean /= C;
              gy_mean /= C;
              for (int c = 0; c < C; ++c)
                gx.at(b, c, h, w) = static_cast<Real>(
                    inv * (g.at(b, c, h, w) - g_mean - static_cast<double>(out.at(b, c, h, w)) * gy_mean));
            }
        return std::vector<T<Real>>{gx};
      });
}

template <typename Real>
Var<Real> softmax_channels(Var<Real> x) {
  return x.tape->record(
      "softmax_channels", {x},
      [](const Inputs<Real>& in) {
        const T<Real>& src = *in[0];
        T<Real> y(src.shape());
        const int C = src.channels();
        for (int b = 0; b < src.batch(); ++b)
          for (int h = 0; h < src.height(); ++h)
            for (int w = 0; w < src.width(); ++w) {
              double m = -std::numeric_limits<double>::infinity();
              for (int c = 0; c < C; ++c) m = std::max(m, static_cast<double>(src.at(b, c, h, w)));
              double z = 0.0;
              for (int c = 0; c < C; ++c) z += std::exp(src.at(b, c, h, w) - m);
              for (int c = 0; c < C; ++c)
                y.at(b, c, h, w) = static_cast<Real>(std::exp(src.at(b, c, h, w) - m) / z);
            }
        return y;
      },
      [](const Inputs<Real>& in, const T<Real>& out, const T<Real>& g) {
        T<Real> gx(in[0]->shape());
        const int C = gx.channels();
        for (int b = 0; b < gx.batch(); ++b)
          for (int h = 0; h < gx.height(); ++h)
            for (int w = 0; w < gx.width(); ++w) {
              double dot = 0.0;
              for (int c = 0; c < C; ++c)
                dot += static_cast<double>(g.at(b, c, h, w)) * out.at(b, c, h, w);
              for (int c = 0; c < C; ++c)
                gx.at(b, c, h, w) = static_cast<Real>(out.at(b, c, h, w) * (g.at(b, c, h, w) - dot));
            }
        return std::vector<T<Real>>{gx};
      });
}

template <typename Real>
Var<Real> maximum(const std::vector<Var<Real>>& xs) {
  if (xs.empty()) throw ShapeError("maximum: no inputs");
  for (const auto& v : xs) require_same_shape(v.shape(), xs[0].shape(), "maximum");
  auto argmax = [](const Inputs<Real>& in, std::size_t i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < in.size(); ++k)
      if ((*in[k])[i] > (*in[best])[i]) best = k;
    return best;
  };
  return xs[0].tape->record(
      "maximum", xs,
      [argmax](const Inputs<Real>& in) {
        T<Real> y(in[0]->shape());
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = (*in[argmax(in, i)])[i];
        return y;
      },
      [argmax](const Inputs<Real>& in, const T<Real>&, const T<Real>& g) {
        std::vector<T<Real>> grads(in.size(), T<Real>(in[0]->shape()));
        for (std::size_t i = 0; i < g.size(); ++i) grads[argmax(in, i)][i] = g[i];
        return grads;
      });
}

template <typename Real>
Var<Real> hypot(Var<Real> a, Var<Real> b) {
  require_same_shape(a.shape(), b.shape(), "hypot");
  return a.tape->record(
      "hypot", {a, b},
      [](const Inputs<Real>& in) {
        T<Real> y(in[0]->shape());
        for (std::size_t i = 0; i < y.size(); ++i)
          y[i] = static_cast<Real>(std::hypot(static_cast<double>((*in[0])[i]),
                                              static_cast<double>((*in[1])[i])));
        return y;
      },
      [](const Inputs<Real>& in, const T<Real>& out, const T<Real>& g) {
        T<Real> ga(in[0]->shape()), gb(in[1]->shape());
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double r = out[i];
          if (r == 0.0) continue;
          ga[i] = static_cast<Real>(g[i] * (*in[0])[i] / r);
          gb[i] = static_cast<Real>(g[i] * (*in[1])[i] / r);
        }
        return std::vector<T<Real>>{ga, gb};
      });
}

template <typename Real>
Var<Real> image_max(Var<Real> x) {
  auto argmax = [](const T<Real>& src, int b) {
    const std::size_t n = static_cast<std::size_t>(src.channels()) * src.shape().plane();
    const std::size_t base = static_cast<std::size_t>(b) * n;
    std::size_t best = base;
    for (std::size_t i = base + 1; i < base + n; ++i)
      if (src[i] > src[best]) best = i;
    return best;
  };
  return x.tape->record(
      "image_max", {x},
      [argmax](const Inputs<Real>& in) {
        T<Real> y(Shape{in[0]->batch(), 1, 1, 1});
        for (int b = 0; b < in[0]->batch(); ++b) y[b] = (*in[0])[argmax(*in[0], b)];
        return y;
      },
      [argmax](const Inputs<Real>& in, const T<Real>&, const T<Real>& g) {
        T<Real> gx(in[0]->shape());
        for (int b = 0; b < in[0]->batch(); ++b) gx[argmax(*in[0], b)] = g[b];
        return std::vector<T<Real>>{gx};
      });
}

template <typename Real>
Var<Real> sum_all(Var<Real> x) {
  return x.tape->record(
      "sum_all", {x},
      [](const Inputs<Real>& in) {
        double s = 0.0;
        for (Real v : in[0]->data()) s += v;
        return T<Real>::scalar(static_cast<Real>(s));
      },
      [](const Inputs<Real>& in, const T<Real>&, const T<Real>& g) {
        return std::vector<T<Real>>{T<Real>(in[0]->shape(), g.item())};
      });
}

#define PLUME_INSTANTIATE_OPS(R)                                                        \
  template BasicTensor<R> reduce_to(const BasicTensor<R>&, const Shape&);               \
  template ConvVars<R> bind(Tape<R>&, const KernelWeights<R>&, const std::string&);     \
  template Var<R> conv2d(Var<R>, const ConvVars<R>&);                                   \
  template Var<R> maxpool2(Var<R>);                                                     \
  template Var<R> global_avg(Var<R>);                                                   \
  template Var<R> channel_std(Var<R>);                                                  \
  template Var<R> upsample_nearest(Var<R>, int, int);                                   \
  template Var<R> unary(Var<R>, Unary);                                                 \
  template Var<R> add(Var<R>, Var<R>);                                                  \
  template Var<R> sub(Var<R>, Var<R>);                                                  \
  template Var<R> mul(Var<R>, Var<R>);                                                  \
  template Var<R> div(Var<R>, Var<R>);                                                  \
  template Var<R> scale(Var<R>, double);                                                \
  template Var<R> add_scalar(Var<R>, double);                                           \
  template Var<R> dct2(Var<R>);                                                         \
  template Var<R> idct2(Var<R>);                                                        \
  template Var<R> slice_channels(Var<R>, int, int);                                     \
  template Var<R> concat_channels(const std::vector<Var<R>>&);                          \
  template Var<R> channel_norm(Var<R>, double);                                         \
  template Var<R> softmax_channels(Var<R>);                                             \
  template Var<R> maximum(const std::vector<Var<R>>&);                                  \
  template Var<R> hypot(Var<R>, Var<R>);                                                \
  template Var<R> image_max(Var<R>);                                                    \
  template Var<R> sum_all(Var<R>);

PLUME_INSTANTIATE_OPS(float)
PLUME_INSTANTIATE_OPS(double)

#undef PLUME_INSTANTIATE_OPS

}  // namespace plume::ad
