#include "plume/edge.hpp"

#include <cmath>
#include <string>

namespace plume::edge {

namespace {

template <typename Real>
BasicTensor<Real> kernel3(std::initializer_list<double> v) {
  return BasicTensor<Real>(Shape{1, 1, 3, 3}, std::vector<Real>(v.begin(), v.end()));
}

// A fixed (1,1,k,k) kernel replicated into a depthwise filter over `channels`.
template <typename Real>
ad::ConvVars<Real> fixed_depthwise(Tape<Real>& tape, const BasicTensor<Real>& kernel, int channels,
                                   const std::string& name) {
  const int k = kernel.height();
  BasicTensor<Real> w(Shape{channels, 1, k, k});
  for (int c = 0; c < channels; ++c) {
    auto src = kernel.data();
    std::copy(src.begin(), src.end(), w.plane(c, 0).begin());
  }
  return ad::ConvVars<Real>{ConvMode::depthwise, tape.leaf(std::move(w), name), std::nullopt};
}

template <typename Real>
BasicTensor<Real> convolve_fixed(const BasicTensor<Real>& x, const BasicTensor<Real>& kernel) {
  Tape<Real> tape;
  return ad::conv2d(tape.leaf(x), fixed_depthwise(tape, kernel, x.channels(), "kernel")).value();
}

double stable_logit(double a) { return std::log(a) - std::log1p(-a); }

}  // namespace

template <typename Real>
DirectionalBank<Real> DirectionalBank<Real>::make(const std::vector<int>& angles) {
  if (angles.empty()) throw std::invalid_argument("directional bank needs at least one angle");
  DirectionalBank bank;
  for (int a : angles) {
    switch (a) {
      case 0: bank.kernels.push_back(kernel3<Real>({-1, 0, 1, -2, 0, 2, -1, 0, 1})); break;
      case 45: bank.kernels.push_back(kernel3<Real>({0, 1, 2, -1, 0, 1, -2, -1, 0})); break;
      case 90: bank.kernels.push_back(kernel3<Real>({-1, -2, -1, 0, 0, 0, 1, 2, 1})); break;
      case 135: bank.kernels.push_back(kernel3<Real>({-2, -1, 0, -1, 0, 1, 0, 1, 2})); break;
      default:
        throw std::invalid_argument("unsupported orientation " + std::to_string(a) +
                                    " (expected 0, 45, 90 or 135)");
    }
    bank.angles.push_back(a);
  }
  return bank;
}

template <typename Real>
GaborBank<Real> GaborBank<Real>::make(int scales) {
  if (scales < 1) throw std::invalid_argument("gabor bank needs at least one scale");
  GaborBank bank;
  const int r = bank.extent / 2;
  for (int s = 0; s < scales; ++s) {
    const double lambda = 3.0 * std::pow(2.0, s);
    bank.wavelengths.push_back(lambda);
    std::vector<double> ev, od;
    for (int i = -r; i <= r; ++i)
      for (int j = -r; j <= r; ++j) {
        const double env = std::exp(-(i * i + j * j) / (2.0 * bank.sigma * bank.sigma));
        ev.push_back(env * std::cos(2.0 * M_PI * j / lambda));
        od.push_back(env * std::sin(2.0 * M_PI * j / lambda));
      }
    double mean = 0.0;
    for (double v : ev) mean += v;
    mean /= static_cast<double>(ev.size());
    for (double& v : ev) v -= mean;
    auto normalize = [](std::vector<double>& k) {
      double n = 0.0;
      for (double v : k) n += v * v;
      n = std::sqrt(n);
      for (double& v : k) v /= n;
    };
    normalize(ev);
    normalize(od);
    const Shape ks{1, 1, bank.extent, bank.extent};
    bank.even.emplace_back(ks, std::vector<Real>(ev.begin(), ev.end()));
    bank.odd.emplace_back(ks, std::vector<Real>(od.begin(), od.end()));
  }
  return bank;
}

template <typename Real>
double AgpeoParams<Real>::alpha() const {
  const double l = alpha_logit.item();
  return l >= 0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
}

template <typename Real>
AgpeoParams<Real> AgpeoParams<Real>::with_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("learnable alpha must lie strictly inside (0, 1)");
  AgpeoParams p;
  p.alpha_logit = BasicTensor<Real>::scalar(static_cast<Real>(stable_logit(alpha)));
  return p;
}

template <typename Real>
MsepmParams<Real> MsepmParams<Real>::init(int levels, int in_channels, int out_channels, Prng& rng) {
  if (levels < 0) throw std::invalid_argument("pyramid levels must be >= 0");
  MsepmParams p;
  for (int i = 0; i <= levels; ++i)
    p.projections.push_back(
        KernelWeights<Real>::init(ConvMode::pointwise, in_channels, out_channels, 1, true, rng));
  return p;
}

template <typename Real>
MsepmParams<Real> MsepmParams<Real>::identity(int levels, int channels) {
  MsepmParams p;
  for (int i = 0; i <= levels; ++i) p.projections.push_back(KernelWeights<Real>::identity(channels));
  return p;
}

template <typename Real>
Var<Real> directional_gradient(Var<Real> x, const DirectionalBank<Real>& bank) {
  std::vector<Var<Real>> responses;
  for (std::size_t k = 0; k < bank.kernels.size(); ++k) {
    auto w = fixed_depthwise(*x.tape, bank.kernels[k], x.shape().channels,
                             "K" + std::to_string(bank.angles[k]));
    responses.push_back(ad::unary(ad::conv2d(x, w), ad::Unary::abs));
  }
  return responses.size() == 1 ? responses[0] : ad::maximum(responses);
}

template <typename Real>
Var<Real> phase_congruency(Var<Real> x, const GaborBank<Real>& bank, double eps) {
  const int C = x.shape().channels;
  const std::size_t S = bank.even.size();
  std::vector<Var<Real>> parts;  // even responses then odd responses
  for (std::size_t s = 0; s < S; ++s)
    parts.push_back(ad::conv2d(x, fixed_depthwise(*x.tape, bank.even[s], C, "gabor_even")));
  for (std::size_t s = 0; s < S; ++s)
    parts.push_back(ad::conv2d(x, fixed_depthwise(*x.tape, bank.odd[s], C, "gabor_odd")));

  using Inputs = typename TapeNode<Real>::Inputs;
  // P = |sum_s r_s| / (sum_s |r_s| + eps), r_s = even_s + i odd_s, all in double.
  return x.tape->record(
      "phase_congruency", parts,
      [S, eps](const Inputs& in) {
        BasicTensor<Real> p(in[0]->shape());
        for (std::size_t i = 0; i < p.size(); ++i) {
          double re = 0.0, im = 0.0, amp = 0.0;
          for (std::size_t s = 0; s < S; ++s) {
            const double e = (*in[s])[i], o = (*in[S + s])[i];
            re += e;
            im += o;
            amp += std::hypot(e, o);
          }
          p[i] = static_cast<Real>(std::hypot(re, im) / (amp + eps));
        }
        return p;
      },
      [S, eps](const Inputs& in, const BasicTensor<Real>&, const BasicTensor<Real>& g) {
        std::vector<BasicTensor<Real>> grads(2 * S, BasicTensor<Real>(in[0]->shape()));
        for (std::size_t i = 0; i < g.size(); ++i) {
          double re = 0.0, im = 0.0, amp = 0.0;
          for (std::size_t s = 0; s < S; ++s) {
            const double e = (*in[s])[i], o = (*in[S + s])[i];
            re += e;
            im += o;
            amp += std::hypot(e, o);
          }
          const double num = std::hypot(re, im), den = amp + eps, p = num / den;
          for (std::size_t s = 0; s < S; ++s) {
            const double e = (*in[s])[i], o = (*in[S + s])[i], a = std::hypot(e, o);
            double de = 0.0, dod = 0.0;
            if (num > 0.0) {
              de += re / num / den;
              dod += im / num / den;
            }
            if (a > 0.0) {
              de -= p / den * e / a;
              dod -= p / den * o / a;
            }
            grads[s][i] = static_cast<Real>(g[i] * de);
            grads[S + s][i] = static_cast<Real>(g[i] * dod);
          }
        }
        return grads;
      });
}

template <typename Real>
Var<Real> normalize_by_max(Var<Real> g, double eps) {
  return ad::div(g, ad::add_scalar(ad::image_max(g), eps));
}

template <typename Real>
Var<Real> fuse(Var<Real> g_norm, Var<Real> p, Var<Real> alpha) {
  const Var<Real> one_minus = ad::add_scalar(ad::scale(alpha, -1.0), 1.0);
  return ad::add(ad::mul(alpha, g_norm), ad::mul(one_minus, p));
}

template <typename Real>
AgpeoVars<Real> agpeo(Var<Real> x, Var<Real> alpha_logit, const EdgeBanks<Real>& banks, double eps) {
  AgpeoVars<Real> v;
  v.g_norm = normalize_by_max(directional_gradient(x, banks.directional), eps);
  v.p = phase_congruency(x, banks.gabor, eps);
  v.alpha = ad::sigmoid(alpha_logit);
  v.e0 = fuse(v.g_norm, v.p, v.alpha);
  return v;
}

template <typename Real>
EdgePyramidVars<Real> build_pyramid(Var<Real> e0, const std::vector<ad::ConvVars<Real>>& projections) {
  if (projections.empty()) throw std::invalid_argument("pyramid needs at least one projection");
  const int levels = static_cast<int>(projections.size()) - 1;
  const Shape s = e0.shape();
  if (levels >= 31 || (s.height >> levels) < 1 || (s.width >> levels) < 1)
    throw ShapeError("pyramid: " + std::to_string(levels) + " levels need H, W >= " +
                     std::to_string(1 << std::min(levels, 30)) + ", got " + s.str());
  EdgePyramidVars<Real> pyr;
  pyr.levels.push_back(e0);
  for (int i = 1; i <= levels; ++i) pyr.levels.push_back(ad::maxpool2(pyr.levels.back()));
  for (int i = 0; i <= levels; ++i) pyr.projected.push_back(ad::conv2d(pyr.levels[i], projections[i]));
  return pyr;
}

template <typename Real>
BasicTensor<Real> directional_gradient(const BasicTensor<Real>& x, const DirectionalBank<Real>& bank) {
  Tape<Real> tape;
  return directional_gradient(tape.leaf(x), bank).value();
}

template <typename Real>
BasicTensor<Real> phase_congruency(const BasicTensor<Real>& x, const GaborBank<Real>& bank, double eps) {
  Tape<Real> tape;
  return phase_congruency(tape.leaf(x), bank, eps).value();
}

template <typename Real>
AgpeoResult<Real> agpeo(const BasicTensor<Real>& x, const AgpeoParams<Real>& params,
                        const EdgeBanks<Real>& banks) {
  Tape<Real> tape;
  auto v = agpeo(tape.leaf(x), tape.leaf(params.alpha_logit), banks, params.eps);
  return AgpeoResult<Real>{v.g_norm.value(), v.p.value(), v.e0.value()};
}

template <typename Real>
AgpeoResult<Real> agpeo_fixed(const BasicTensor<Real>& x, double alpha, const EdgeBanks<Real>& banks,
                              double eps) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  Tape<Real> tape;
  const Var<Real> xv = tape.leaf(x);
  const Var<Real> g_norm = normalize_by_max(directional_gradient(xv, banks.directional), eps);
  const Var<Real> p = phase_congruency(xv, banks.gabor, eps);
  const Var<Real> e0 = fuse(g_norm, p, tape.leaf(BasicTensor<Real>::scalar(static_cast<Real>(alpha))));
  return AgpeoResult<Real>{g_norm.value(), p.value(), e0.value()};
}

template <typename Real>
EdgePyramid<Real> build_pyramid(const BasicTensor<Real>& e0, const MsepmParams<Real>& params) {
  Tape<Real> tape;
  std::vector<ad::ConvVars<Real>> proj;
  for (std::size_t i = 0; i < params.projections.size(); ++i)
    proj.push_back(ad::bind(tape, params.projections[i], "msepm." + std::to_string(i)));
  auto v = build_pyramid(tape.leaf(e0), proj);
  EdgePyramid<Real> out;
  for (auto& l : v.levels) out.levels.push_back(l.value());
  for (auto& l : v.projected) out.projected.push_back(l.value());
  return out;
}

template <typename Real>
BasicTensor<Real> sobel_edge(const BasicTensor<Real>& x) {
  const auto bank = DirectionalBank<Real>::make({0, 90});
  const auto gx = convolve_fixed(x, bank.kernels[0]);
  const auto gy = convolve_fixed(x, bank.kernels[1]);
  BasicTensor<Real> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<Real>(std::hypot(static_cast<double>(gx[i]), static_cast<double>(gy[i])));
  return out;
}

template <typename Real>
BasicTensor<Real> laplacian_edge(const BasicTensor<Real>& x) {
  auto out = convolve_fixed(x, kernel3<Real>({0, 1, 0, 1, -4, 1, 0, 1, 0}));
  for (auto& v : out.data()) v = std::fabs(v);
  return out;
}

#define PLUME_INSTANTIATE_EDGE(R)                                                                \
  template struct DirectionalBank<R>;                                                            \
  template struct GaborBank<R>;                                                                  \
  template struct AgpeoParams<R>;                                                                \
  template struct MsepmParams<R>;                                                                \
  template Var<R> directional_gradient(Var<R>, const DirectionalBank<R>&);                       \
  template Var<R> phase_congruency(Var<R>, const GaborBank<R>&, double);                         \
  template Var<R> normalize_by_max(Var<R>, double);                                              \
  template Var<R> fuse(Var<R>, Var<R>, Var<R>);                                                  \
  template AgpeoVars<R> agpeo(Var<R>, Var<R>, const EdgeBanks<R>&, double);                      \
  template EdgePyramidVars<R> build_pyramid(Var<R>, const std::vector<ad::ConvVars<R>>&);        \
  template BasicTensor<R> directional_gradient(const BasicTensor<R>&, const DirectionalBank<R>&); \
  template BasicTensor<R> phase_congruency(const BasicTensor<R>&, const GaborBank<R>&, double);   \
  template AgpeoResult<R> agpeo(const BasicTensor<R>&, const AgpeoParams<R>&, const EdgeBanks<R>&); \
  template AgpeoResult<R> agpeo_fixed(const BasicTensor<R>&, double, const EdgeBanks<R>&, double); \
  template EdgePyramid<R> build_pyramid(const BasicTensor<R>&, const MsepmParams<R>&);           \
  template BasicTensor<R> sobel_edge(const BasicTensor<R>&);                                     \
  template BasicTensor<R> laplacian_edge(const BasicTensor<R>&);

PLUME_INSTANTIATE_EDGE(float)
PLUME_INSTANTIATE_EDGE(double)

#undef PLUME_INSTANTIATE_EDGE

}  // namespace plume::edge
