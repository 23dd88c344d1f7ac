#include "plume/routing.hpp"

#include <algorithm>
#include <cmath>

namespace plume::routing {

namespace {

template <typename Real>
KernelWeights<Real> zero_conv(ConvMode mode, int in, int out, int k) {
  KernelWeights<Real> kw;
  kw.mode = mode;
  kw.weight = BasicTensor<Real>(mode == ConvMode::depthwise ? Shape{in, 1, k, k} : Shape{out, in, k, k});
  kw.bias = BasicTensor<Real>(Shape{1, kw.weight.batch(), 1, 1});
  return kw;
}

template <typename Real>
void push_conv(std::vector<Var<Real>>& out, const ad::ConvVars<Real>& c) {
  out.push_back(c.weight);
  if (c.bias) out.push_back(*c.bias);
}

// w must be (B, 1, H, W) matching f in batch and space.
void check_weight_map(const Shape& f, const Shape& w, const char* what) {
  if (w.channels != 1 || w.batch != f.batch || w.height != f.height || w.width != f.width)
    throw ShapeError(std::string(what) + ": weight map must be (" + std::to_string(f.batch) + ",1," +
                     std::to_string(f.height) + "," + std::to_string(f.width) + "), got " + w.str());
}

template <typename Real>
Var<Real> modulation(Var<Real> f, Var<Real> w) {
  return ad::mul(w, ad::add_scalar(ad::sigmoid(ad::channel_std(f)), kBA));
}

}  // namespace

void check_pyramid(const Shape& p3, const Shape& p4, const Shape& p5) {
  auto fail = [&](const std::string& why) {
    throw ShapeError("feature pyramid: " + why + " (P3 " + p3.str() + ", P4 " + p4.str() + ", P5 " +
                     p5.str() + ")");
  };
  if (p3.batch != p4.batch || p5.batch != p4.batch) fail("batch axis mismatch");
  if (p3.channels != p4.channels || p5.channels != p4.channels) fail("channel axis mismatch");
  if (p3.height != 2 * p4.height || p4.height != 2 * p5.height) fail("height axis must halve per level");
  if (p3.width != 2 * p4.width || p4.width != 2 * p5.width) fail("width axis must halve per level");
}

template <typename Real>
ImportanceParams<Real> ImportanceParams<Real>::init(int channels, Prng& rng) {
  const int r = reduced_channels(channels);
  ImportanceParams p;
  p.global_reduce = KernelWeights<Real>::init(ConvMode::pointwise, channels, r, 1, true, rng);
  p.global_expand = KernelWeights<Real>::init(ConvMode::pointwise, r, channels, 1, true, rng);
  p.local_reduce = KernelWeights<Real>::init(ConvMode::dense, channels, r, 3, true, rng);
  p.local_expand = KernelWeights<Real>::init(ConvMode::pointwise, r, channels, 1, true, rng);
  p.div_reduce = KernelWeights<Real>::init(ConvMode::pointwise, channels, r, 1, true, rng);
  p.div_expand = KernelWeights<Real>::init(ConvMode::pointwise, r, channels, 1, true, rng);
  p.fusion_logits = uniform_tensor<Real>(Shape{1, 3, 1, 1}, rng, -0.5, 0.5);
  return p;
}

template <typename Real>
ImportanceParams<Real> ImportanceParams<Real>::zeros(int channels) {
  const int r = reduced_channels(channels);
  ImportanceParams p;
  p.global_reduce = zero_conv<Real>(ConvMode::pointwise, channels, r, 1);
  p.global_expand = zero_conv<Real>(ConvMode::pointwise, r, channels, 1);
  p.local_reduce = zero_conv<Real>(ConvMode::dense, channels, r, 3);
  p.local_expand = zero_conv<Real>(ConvMode::pointwise, r, channels, 1);
  p.div_reduce = zero_conv<Real>(ConvMode::pointwise, channels, r, 1);
  p.div_expand = zero_conv<Real>(ConvMode::pointwise, r, channels, 1);
  return p;
}

template <typename Real>
RefineParams<Real> RefineParams<Real>::init(int channels, Prng& rng) {
  RefineParams p;
  p.conv1 = KernelWeights<Real>::init(ConvMode::dense, channels, channels, 3, true, rng);
  p.conv2 = KernelWeights<Real>::init(ConvMode::dense, channels, channels, 3, true, rng);
  return p;
}

template <typename Real>
RefineParams<Real> RefineParams<Real>::identity(int channels) {
  RefineParams p;
  p.conv1 = zero_conv<Real>(ConvMode::dense, channels, channels, 3);
  p.conv2 = zero_conv<Real>(ConvMode::dense, channels, channels, 3);
  return p;
}

template <typename Real>
CasrParams<Real> CasrParams<Real>::init(int channels, Prng& rng) {
  CasrParams p;
  p.importance = ImportanceParams<Real>::init(channels, rng);
  p.path_head = KernelWeights<Real>::init(ConvMode::pointwise, channels, kPaths, 1, true, rng);
  p.refine_p3 = RefineParams<Real>::init(channels, rng);
  p.refine_p4 = RefineParams<Real>::init(channels, rng);
  return p;
}

template <typename Real>
std::vector<Var<Real>> ImportanceVars<Real>::parameters() const {
  std::vector<Var<Real>> out;
  for (const auto* c : {&global_reduce, &global_expand, &local_reduce, &local_expand, &div_reduce,
                        &div_expand})
    push_conv(out, *c);
  out.push_back(fusion_logits);
  return out;
}

template <typename Real>
std::vector<Var<Real>> RefineVars<Real>::parameters() const {
  std::vector<Var<Real>> out;
  push_conv(out, conv1);
  push_conv(out, conv2);
  return out;
}

template <typename Real>
std::vector<Var<Real>> CasrVars<Real>::parameters() const {
  auto out = importance.parameters();
  push_conv(out, path_head);
  for (const auto& v : refine_p3.parameters()) out.push_back(v);
  for (const auto& v : refine_p4.parameters()) out.push_back(v);
  return out;
}

template <typename Real>
ImportanceVars<Real> bind(Tape<Real>& tape, const ImportanceParams<Real>& p, const std::string& prefix) {
  ImportanceVars<Real> v;
  v.global_reduce = ad::bind(tape, p.global_reduce, prefix + ".global_reduce");
  v.global_expand = ad::bind(tape, p.global_expand, prefix + ".global_expand");
  v.local_reduce = ad::bind(tape, p.local_reduce, prefix + ".local_reduce");
  v.local_expand = ad::bind(tape, p.local_expand, prefix + ".local_expand");
  v.div_reduce = ad::bind(tape, p.div_reduce, prefix + ".div_reduce");
  v.div_expand = ad::bind(tape, p.div_expand, prefix + ".div_expand");
  v.fusion_logits = tape.leaf(p.fusion_logits, prefix + ".fusion_logits");
  return v;
}

template <typename Real>
RefineVars<Real> bind(Tape<Real>& tape, const RefineParams<Real>& p, const std::string& prefix) {
  return RefineVars<Real>{ad::bind(tape, p.conv1, prefix + ".conv1"),
                          ad::bind(tape, p.conv2, prefix + ".conv2")};
}

template <typename Real>
CasrVars<Real> bind(Tape<Real>& tape, const CasrParams<Real>& p, const std::string& prefix) {
  CasrVars<Real> v;
  v.importance = routing::bind(tape, p.importance, prefix + ".ie");
  v.path_head = ad::bind(tape, p.path_head, prefix + ".path_head");
  v.refine_p3 = routing::bind(tape, p.refine_p3, prefix + ".refine_p3");
  v.refine_p4 = routing::bind(tape, p.refine_p4, prefix + ".refine_p4");
  v.enabled = p.enabled;
  return v;
}

template <typename Real>
ImportanceTraceVars<Real> importance_map(Var<Real> x, const ImportanceVars<Real>& p) {
  const Shape s = x.shape();
  if (s.channels != p.global_expand.weight.shape().batch)
    throw ShapeError("importance map: channel axis mismatch, input " + s.str());
  ImportanceTraceVars<Real> t;
  const Var<Real> g = ad::sigmoid(
      ad::conv2d(ad::relu(ad::conv2d(ad::global_avg(x), p.global_reduce)), p.global_expand));
  t.global = ad::upsample_nearest(g, s.height, s.width);
  t.local = ad::sigmoid(ad::conv2d(ad::relu(ad::conv2d(x, p.local_reduce)), p.local_expand));

  const Var<Real> sd = ad::channel_std(x);
  const Var<Real> s_norm = ad::div(sd, ad::add_scalar(ad::image_max(sd), kStdEps));
  t.diversity = ad::mul(
      ad::sigmoid(ad::conv2d(ad::relu(ad::conv2d(x, p.div_reduce)), p.div_expand)), s_norm);

  t.weights = ad::softmax_channels(p.fusion_logits);
  Var<Real> mix = ad::mul(ad::slice_channels(t.weights, 0, 1), t.global);
  mix = ad::add(mix, ad::mul(ad::slice_channels(t.weights, 1, 1), t.local));
  mix = ad::add(mix, ad::mul(ad::slice_channels(t.weights, 2, 1), t.diversity));
  t.importance = ad::sigmoid(mix);
  return t;
}

template <typename Real>
std::array<Var<Real>, kPaths> path_weights(Var<Real> importance, const ad::ConvVars<Real>& head) {
  const Var<Real> maps = ad::sigmoid(ad::conv2d(importance, head));
  if (maps.shape().channels != kPaths)
    throw ShapeError("path head must produce 4 channels, got " + maps.shape().str());
  std::array<Var<Real>, kPaths> out;
  for (int i = 0; i < kPaths; ++i) out[i] = ad::slice_channels(maps, i, 1);
  return out;
}

template <typename Real>
Var<Real> aimm_fuse(Var<Real> f1, Var<Real> f2, Var<Real> w) {
  require_same_shape(f1.shape(), f2.shape(), "aimm_fuse");
  check_weight_map(f1.shape(), w.shape(), "aimm_fuse");
  return ad::add(f1, ad::mul(f2, modulation(f2, w)));
}

template <typename Real>
Var<Real> aimm_self_factor(Var<Real> f, Var<Real> w) {
  check_weight_map(f.shape(), w.shape(), "aimm_self");
  return ad::add_scalar(modulation(f, w), kIDAS);
}

template <typename Real>
Var<Real> aimm_self(Var<Real> f, Var<Real> w) {
  return ad::mul(f, aimm_self_factor(f, w));
}

template <typename Real>
Var<Real> refine(Var<Real> x, const RefineVars<Real>& p) {
  return ad::add(x, ad::conv2d(ad::silu(ad::conv2d(x, p.conv1)), p.conv2));
}

template <typename Real>
CasrTraceVars<Real> casr_pan_forward(const FeaturePyramidVars<Real>& pyr, const CasrVars<Real>& p) {
  const Shape s3 = pyr.p3.shape(), s4 = pyr.p4.shape(), s5 = pyr.p5.shape();
  check_pyramid(s3, s4, s5);
  Tape<Real>& tape = *pyr.p4.tape;
  CasrTraceVars<Real> t;
  t.importance = importance_map(pyr.p4, p.importance).importance;
  const auto heads = path_weights(t.importance, p.path_head);
  for (int i = 0; i < kPaths; ++i)
    t.weights[i] = p.enabled[i] ? heads[i]
                                : tape.leaf(BasicTensor<Real>(Shape{s4.batch, 1, s4.height, s4.width}),
                                            "closed_path");

  // high-to-mid, high-to-low, low-to-mid, then self.
  t.p4_fused = aimm_fuse(pyr.p4, ad::upsample_nearest(pyr.p5, s4.height, s4.width), t.weights[0]);
  t.p3_fused = aimm_fuse(pyr.p3, ad::upsample_nearest(pyr.p5, s3.height, s3.width),
                         ad::upsample_nearest(t.weights[1], s3.height, s3.width));
  t.p4_cross = aimm_fuse(t.p4_fused, ad::maxpool2(pyr.p3), t.weights[2]);
  t.p4_self = aimm_self(t.p4_cross, t.weights[3]);
  t.out.p3 = refine(t.p3_fused, p.refine_p3);
  t.out.p4 = refine(t.p4_self, p.refine_p4);
  t.out.p5 = pyr.p5;
  return t;
}

template <typename Real>
BasicTensor<Real> importance_map(const BasicTensor<Real>& x, const ImportanceParams<Real>& p) {
  Tape<Real> tape;
  return importance_map(tape.leaf(x), routing::bind(tape, p)).importance.value();
}

template <typename Real>
std::array<double, 3> fusion_weights(const ImportanceParams<Real>& p) {
  Tape<Real> tape;
  const auto w = ad::softmax_channels(tape.leaf(p.fusion_logits)).value();
  return {static_cast<double>(w[0]), static_cast<double>(w[1]), static_cast<double>(w[2])};
}

template <typename Real>
std::array<BasicTensor<Real>, kPaths> path_weights(const BasicTensor<Real>& importance,
                                                   const KernelWeights<Real>& head) {
  Tape<Real> tape;
  const auto vars = path_weights(tape.leaf(importance), ad::bind(tape, head, "path_head"));
  std::array<BasicTensor<Real>, kPaths> out;
  for (int i = 0; i < kPaths; ++i) out[i] = vars[i].value();
  return out;
}

template <typename Real>
BasicTensor<Real> aimm_fuse(const BasicTensor<Real>& f1, const BasicTensor<Real>& f2,
                            const BasicTensor<Real>& w) {
  Tape<Real> tape;
  return aimm_fuse(tape.leaf(f1), tape.leaf(f2), tape.leaf(w)).value();
}

template <typename Real>
BasicTensor<Real> aimm_self(const BasicTensor<Real>& f, const BasicTensor<Real>& w) {
  Tape<Real> tape;
  return aimm_self(tape.leaf(f), tape.leaf(w)).value();
}

template <typename Real>
BasicTensor<Real> aimm_self_factor(const BasicTensor<Real>& f, const BasicTensor<Real>& w) {
  Tape<Real> tape;
  return aimm_self_factor(tape.leaf(f), tape.leaf(w)).value();
}

template <typename Real>
BasicTensor<Real> transport_blend(const BasicTensor<Real>& local, const BasicTensor<Real>& transport,
                                  const BasicTensor<Real>& w) {
  require_same_shape(local.shape(), transport.shape(), "transport_blend");
  const Shape s = local.shape();
  const bool per_pixel = w.channels() == 1 && s.channels != 1;
  if (per_pixel)
    check_weight_map(s, w.shape(), "transport_blend");
  else
    require_same_shape(s, w.shape(), "transport_blend weight");
  BasicTensor<Real> out(s);
  for (int b = 0; b < s.batch; ++b)
    for (int c = 0; c < s.channels; ++c)
      for (int h = 0; h < s.height; ++h)
        for (int x = 0; x < s.width; ++x) {
          const double a = local.at(b, c, h, x), t = transport.at(b, c, h, x);
          const double wv = w.at(b, per_pixel ? 0 : c, h, x);
          const double v = (1.0 - wv) * a + wv * t;
          out.at(b, c, h, x) = static_cast<Real>(std::clamp(v, std::min(a, t), std::max(a, t)));
        }
  return out;
}

template <typename Real>
BasicTensor<Real> refine(const BasicTensor<Real>& x, const RefineParams<Real>& p) {
  Tape<Real> tape;
  return refine(tape.leaf(x), routing::bind(tape, p, "refine")).value();
}

template <typename Real>
CasrResult<Real> casr_pan_forward(const FeaturePyramid<Real>& pyr, const CasrParams<Real>& p) {
  Tape<Real> tape;
  const FeaturePyramidVars<Real> in{tape.leaf(pyr.p3, "P3"), tape.leaf(pyr.p4, "P4"),
                                    tape.leaf(pyr.p5, "P5")};
  const auto t = casr_pan_forward(in, routing::bind(tape, p));
  CasrResult<Real> r;
  r.importance = t.importance.value();
  for (int i = 0; i < kPaths; ++i) r.weights[i] = t.weights[i].value();
  r.out = FeaturePyramid<Real>{t.out.p3.value(), t.out.p4.value(), t.out.p5.value()};
  return r;
}

template <typename Real>
BasicTensor<Real> velocity_surrogate(const BasicTensor<Real>& w, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("velocity surrogate: dt must be > 0");
  BasicTensor<Real> out(w.shape());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = static_cast<Real>(w[i] / dt);
  return out;
}

#define PLUME_INSTANTIATE_ROUTING(R)                                                             \
  template struct ImportanceParams<R>;                                                           \
  template struct RefineParams<R>;                                                               \
  template struct CasrParams<R>;                                                                 \
  template struct ImportanceVars<R>;                                                             \
  template struct RefineVars<R>;                                                                 \
  template struct CasrVars<R>;                                                                   \
  template ImportanceVars<R> bind(Tape<R>&, const ImportanceParams<R>&, const std::string&);     \
  template RefineVars<R> bind(Tape<R>&, const RefineParams<R>&, const std::string&);             \
  template CasrVars<R> bind(Tape<R>&, const CasrParams<R>&, const std::string&);                 \
  template ImportanceTraceVars<R> importance_map(Var<R>, const ImportanceVars<R>&);              \
  template std::array<Var<R>, kPaths> path_weights(Var<R>, const ad::ConvVars<R>&);              \
  template Var<R> aimm_fuse(Var<R>, Var<R>, Var<R>);                                             \
  template Var<R> aimm_self_factor(Var<R>, Var<R>);                                              \
  template Var<R> aimm_self(Var<R>, Var<R>);                                                     \
  template Var<R> refine(Var<R>, const RefineVars<R>&);                                          \
  template CasrTraceVars<R> casr_pan_forward(const FeaturePyramidVars<R>&, const CasrVars<R>&);  \
  template BasicTensor<R> importance_map(const BasicTensor<R>&, const ImportanceParams<R>&);     \
  template std::array<double, 3> fusion_weights(const ImportanceParams<R>&);                     \
  template std::array<BasicTensor<R>, kPaths> path_weights(const BasicTensor<R>&,                \
                                                           const KernelWeights<R>&);             \
  template BasicTensor<R> aimm_fuse(const BasicTensor<R>&, const BasicTensor<R>&,                \
                                    const BasicTensor<R>&);                                      \
  template BasicTensor<R> aimm_self(const BasicTensor<R>&, const BasicTensor<R>&);               \
  template BasicTensor<R> aimm_self_factor(const BasicTensor<R>&, const BasicTensor<R>&);        \
  template BasicTensor<R> transport_blend(const BasicTensor<R>&, const BasicTensor<R>&,          \
                                          const BasicTensor<R>&);                                \
  template BasicTensor<R> refine(const BasicTensor<R>&, const RefineParams<R>&);                 \
  template CasrResult<R> casr_pan_forward(const FeaturePyramid<R>&, const CasrParams<R>&);       \
  template BasicTensor<R> velocity_surrogate(const BasicTensor<R>&, double);

PLUME_INSTANTIATE_ROUTING(float)
PLUME_INSTANTIATE_ROUTING(double)

#undef PLUME_INSTANTIATE_ROUTING

}  // namespace plume::routing
