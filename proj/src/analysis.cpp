#include "plume/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "plume/gas_block.hpp"
#include "plume/ops.hpp"
#include "plume/prng.hpp"

namespace plume::analysis {

double relative_error(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8});
}

std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite differences: h must be > 0");
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + h;
    const double fp = f(theta);
    theta[i] = orig - h;
    const double fm = f(theta);
    theta[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::domain_error("finite differences: non-finite function value at coordinate " +
                              std::to_string(i));
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double finite_diff(const std::function<double(double)>& f, double x, double h) {
  return finite_diff_grad([&](const std::vector<double>& t) { return f(t[0]); }, {x}, h)[0];
}

std::size_t GradCheckReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const GradCheckEntry& e) { return !e.pass; }));
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.rel_error);
  return m;
}

void GradCheckReport::append(const GradCheckReport& other) {
  entries.insert(entries.end(), other.entries.begin(), other.entries.end());
}

namespace {

std::vector<std::size_t> pick_coordinates(std::size_t n, int max_count, Prng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (max_count <= 0 || n <= static_cast<std::size_t>(max_count)) return idx;
  const auto k = static_cast<std::size_t>(max_count);
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport grad_check(Tape<double>& tape, const std::vector<Var<double>>& outputs,
                           const std::vector<Var<double>>& params, const GradCheckOptions& opt,
                           const std::string& target) {
  if (!(opt.h > 0.0)) throw std::invalid_argument("grad_check: h must be > 0");
  Prng rng(opt.seed);
  std::vector<TensorD> probes;
  for (const auto& out : outputs) {
    TensorD c(out.shape());
    for (auto& v : c.data()) v = rng.normal();
    probes.push_back(std::move(c));
  }

  auto loss = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const auto y = outputs[i].value().data();
      const auto c = probes[i].data();
      for (std::size_t k = 0; k < y.size(); ++k) s += c[k] * y[k];
    }
    if (!std::isfinite(s)) throw std::domain_error("grad_check: non-finite loss");
    return s;
  };

  std::vector<TensorD> analytic;
  for (const auto& p : params) analytic.emplace_back(p.shape());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto grads = tape.backward(outputs[i], probes[i]);
    for (std::size_t j = 0; j < params.size(); ++j) {
      const auto g = grads.grad(params[j]);
      for (std::size_t k = 0; k < g.size(); ++k) analytic[j][k] += g[k];
    }
  }

  GradCheckReport report;
  report.target = target;
  report.h = opt.h;
  report.tolerance = opt.tolerance;
  for (std::size_t j = 0; j < params.size(); ++j) {
    const Var<double> p = params[j];
    const TensorD original = p.value();
    for (std::size_t k : pick_coordinates(original.size(), opt.max_coordinates, rng)) {
      TensorD probe = original;
      probe[k] = original[k] + opt.h;
      tape.set_leaf(p, probe);
      tape.replay();
      const double lp = loss();
      probe[k] = original[k] - opt.h;
      tape.set_leaf(p, probe);
      tape.replay();
      const double lm = loss();
      tape.set_leaf(p, original);

      GradCheckEntry e;
      e.name = tape.node(p).name.empty() ? "leaf" + std::to_string(p.id) : tape.node(p).name;
      e.index = k;
      e.analytic = analytic[j][k];
      e.numeric = (lp - lm) / (2.0 * opt.h);
      e.rel_error = relative_error(e.analytic, e.numeric);
      e.pass = e.rel_error <= opt.tolerance;
      report.entries.push_back(std::move(e));
    }
  }
  tape.replay();
  return report;
}

ErfNetwork dwconv_network(int channels, std::uint64_t seed, int depth) {
  if (depth < 1) throw std::invalid_argument("dwconv network needs depth >= 1");
  Prng rng(seed);
  std::vector<KernelWeights<double>> layers;
  for (int i = 0; i < depth; ++i)
    layers.push_back(KernelWeights<double>::init(ConvMode::depthwise, channels, channels, 3, false, rng));
  ErfNetwork net;
  net.description = std::to_string(depth) + "x depthwise 3x3 conv, C=" + std::to_string(channels);
  net.channels = channels;
  net.forward = [layers](Var<double> x) {
    for (std::size_t i = 0; i < layers.size(); ++i)
      x = ad::conv2d(x, ad::bind(*x.tape, layers[i], "dw" + std::to_string(i)));
    return x;
  };
  return net;
}

ErfNetwork gasblock_network(int channels, std::uint64_t seed, double alpha_decay) {
  Prng rng(seed);
  const auto params = gas::GasBlockParams<double>::init(channels, 1, rng, alpha_decay);
  ErfNetwork net;
  net.description = "gas block, C=" + std::to_string(channels) + ", zero edge prior";
  net.channels = channels;
  net.forward = [params](Var<double> x) {
    const Shape s = x.shape();
    const auto edge = x.tape->leaf(TensorD(Shape{s.batch, 1, s.height, s.width}), "edge");
    return gas::forward(x, edge, gas::bind(*x.tape, params)).y;
  };
  return net;
}

ErfMap erf_map(const ErfNetwork& net, int height, int width, std::uint64_t seed, int samples) {
  if (samples < 1) throw std::invalid_argument("erf_map: samples must be >= 1");
  const Shape in_shape{1, net.channels, height, width};
  check_shape_valid(in_shape);
  Prng rng(seed);
  ErfMap erf;
  erf.description = net.description;
  erf.height = height;
  erf.width = width;
  erf.values.assign(static_cast<std::size_t>(height) * width, 0.0);
  for (int n = 0; n < samples; ++n) {
    Tape<double> tape;
    TensorD x(in_shape);
    for (auto& v : x.data()) v = rng.normal();
    const Var<double> xv = tape.leaf(std::move(x), "input");
    const Var<double> y = net.forward(xv);
    const Shape ys = y.shape();
    if (ys.height != height || ys.width != width)
      throw ShapeError("erf_map: network output " + ys.str() + " is not aligned with the input");
    TensorD cot(ys);
    for (int c = 0; c < ys.channels; ++c) cot.at(0, c, height / 2, width / 2) = 1.0;
    const TensorD g = tape.backward(y, cot).grad(xv);
    for (int c = 0; c < net.channels; ++c)
      for (int h = 0; h < height; ++h)
        for (int w = 0; w < width; ++w)
          erf.values[static_cast<std::size_t>(h) * width + w] += std::fabs(g.at(0, c, h, w)) / samples;
  }
  const double m = *std::max_element(erf.values.begin(), erf.values.end());
  if (m > 0.0)
    for (auto& v : erf.values) v /= m;
  return erf;
}

double contribution_ratio(const ErfMap& erf, double t) {
  if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("contribution ratio: t must lie in (0, 1)");
  std::vector<double> v = erf.values;
  std::sort(v.begin(), v.end(), std::greater<>());
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (!(total > 0.0)) throw std::domain_error("contribution ratio: ERF map is all zero");
  double cum = 0.0;
  std::size_t count = 0;
  while (count < v.size()) {
    cum += v[count++];
    if (cum >= t * total) break;
  }
  return static_cast<double>(count) / static_cast<double>(v.size());
}

}  // namespace plume::analysis
