#include "plume/spectral.hpp"

#include <cmath>
#include <complex>
#include <sstream>
#include <string>

#include "plume/kernels.hpp"

namespace plume::spectral {

using cd = std::complex<double>;

FrequencyGrid freq_grid(int height, int width) {
  if (height < 1 || width < 1)
    throw ShapeError("freq_grid: dims must be >= 1, got " + std::to_string(height) + "x" +
                     std::to_string(width));
  FrequencyGrid g;
  g.height = height;
  g.width = width;
  g.omega_x.resize(width);
  g.omega_y.resize(height);
  for (int kx = 0; kx < width; ++kx) g.omega_x[kx] = M_PI * kx / width;
  for (int ky = 0; ky < height; ++ky) g.omega_y[ky] = M_PI * ky / height;
  g.k2.resize(static_cast<std::size_t>(height) * width);
  for (int ky = 0; ky < height; ++ky)
    for (int kx = 0; kx < width; ++kx)
      g.k2[static_cast<std::size_t>(ky) * width + kx] =
          g.omega_x[kx] * g.omega_x[kx] + g.omega_y[ky] * g.omega_y[ky];
  return g;
}

void DiffusionParams::validate() const {
  if (!(diffusion >= 0.0)) throw std::invalid_argument("diffusion coefficient must be >= 0");
  if (!(time >= 0.0)) throw std::invalid_argument("elapsed time must be >= 0");
}

template <typename Real>
SpectralField<Real> dct2(const BasicTensor<Real>& x) {
  return SpectralField<Real>{Basis::dct2, kernels::dct2(x), BasicTensor<Real>()};
}

template <typename Real>
BasicTensor<Real> idct2(const SpectralField<Real>& f) {
  if (f.basis != Basis::dct2) throw std::invalid_argument("idct2: field basis is not dct2");
  return kernels::idct2(f.real);
}

template <typename Real>
SpectralField<Real> decay_apply(const SpectralField<Real>& f, double alpha,
                                const BasicTensor<Real>& w_f) {
  if (f.basis != Basis::dct2) throw std::invalid_argument("decay_apply: field basis is not dct2");
  const Shape& s = f.real.shape();
  require_same_shape(w_f.shape(), Shape{1, s.channels, 1, 1}, "decay_apply channel weights");
  const FrequencyGrid grid = freq_grid(s.height, s.width);
  SpectralField<Real> out{Basis::dct2, BasicTensor<Real>(s), BasicTensor<Real>()};
  std::vector<double> decay(grid.k2.size());
  for (std::size_t i = 0; i < decay.size(); ++i) decay[i] = std::exp(-alpha * grid.k2[i]);
  for (int b = 0; b < s.batch; ++b)
    for (int c = 0; c < s.channels; ++c) {
      const double wc = w_f[c];
      auto src = f.real.plane(b, c);
      auto dst = out.real.plane(b, c);
      for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] = static_cast<Real>(src[i] * decay[i] * wc);
    }
  return out;
}

namespace {

// Row-major n x n matrix exp(sign * 2 pi i m k / n).
std::vector<cd> dft_matrix(int n, double sign) {
  std::vector<cd> m(static_cast<std::size_t>(n) * n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const long long ab = (static_cast<long long>(a) * b) % n;
      m[static_cast<std::size_t>(a) * n + b] = std::polar(1.0, sign * 2.0 * M_PI * ab / n);
    }
  return m;
}

// out = Mh * plane * Mw^T (both symmetric, so transpose is a no-op).
void apply_dft(const std::vector<cd>& mh, const std::vector<cd>& mw, const cd* src, cd* dst,
               int H, int W) {
  std::vector<cd> tmp(static_cast<std::size_t>(H) * W);
  for (int i = 0; i < H; ++i)
    for (int k = 0; k < W; ++k) {
      cd acc = 0.0;
      for (int j = 0; j < W; ++j)
        acc += mw[static_cast<std::size_t>(k) * W + j] * src[static_cast<std::size_t>(i) * W + j];
      tmp[static_cast<std::size_t>(i) * W + k] = acc;
    }
  for (int k = 0; k < H; ++k)
    for (int j = 0; j < W; ++j) {
      cd acc = 0.0;
      for (int i = 0; i < H; ++i)
        acc += mh[static_cast<std::size_t>(k) * H + i] * tmp[static_cast<std::size_t>(i) * W + j];
      dst[static_cast<std::size_t>(k) * W + j] = acc;
    }
}

}  // namespace

template <typename Real>
SpectralField<double> dft2(const BasicTensor<Real>& x) {
  const int H = x.height(), W = x.width();
  const auto mh = dft_matrix(H, -1.0), mw = dft_matrix(W, -1.0);
  SpectralField<double> f{Basis::dft2, TensorD(x.shape()), TensorD(x.shape())};
  const int planes = x.batch() * x.channels();
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const int b = p / x.channels(), c = p % x.channels();
    auto src = x.plane(b, c);
    std::vector<cd> in(src.begin(), src.end()), out(in.size());
    apply_dft(mh, mw, in.data(), out.data(), H, W);
    auto re = f.real.plane(b, c);
    auto im = f.imag.plane(b, c);
    for (std::size_t i = 0; i < out.size(); ++i) {
      re[i] = out[i].real();
      im[i] = out[i].imag();
    }
  }
  return f;
}

template <typename Real>
BasicTensor<Real> idft2(const SpectralField<double>& f, double* imag_residue) {
  if (f.basis != Basis::dft2) throw std::invalid_argument("idft2: field basis is not dft2");
  const Shape& s = f.real.shape();
  const int H = s.height, W = s.width;
  const auto mh = dft_matrix(H, 1.0), mw = dft_matrix(W, 1.0);
  const double norm = 1.0 / (static_cast<double>(H) * W);
  BasicTensor<Real> x(s);
  std::vector<double> residues(static_cast<std::size_t>(s.batch) * s.channels, 0.0);
  const int planes = s.batch * s.channels;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const int b = p / s.channels, c = p % s.channels;
    auto re = f.real.plane(b, c);
    auto im = f.imag.plane(b, c);
    std::vector<cd> in(re.size()), out(re.size());
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = cd(re[i], im[i]);
    apply_dft(mh, mw, in.data(), out.data(), H, W);
    auto dst = x.plane(b, c);
    double worst = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      dst[i] = static_cast<Real>(out[i].real() * norm);
      worst = std::max(worst, std::fabs(out[i].imag() * norm));
    }
    residues[p] = worst;
  }
  if (imag_residue) {
    *imag_residue = 0.0;
    for (double r : residues) *imag_residue = std::max(*imag_residue, r);
  }
  return x;
}

double angular_wavenumber(int m, int n) {
  const int signed_m = m <= n / 2 ? m : m - n;
  return 2.0 * M_PI * signed_m / n;
}

template <typename Real>
BasicTensor<Real> spectral_solve(const BasicTensor<Real>& u0, const DiffusionParams& p,
                                 double* imag_residue) {
  p.validate();
  SpectralField<double> f = dft2(u0);
  const Shape& s = u0.shape();
  for (int b = 0; b < s.batch; ++b)
    for (int c = 0; c < s.channels; ++c) {
      auto re = f.real.plane(b, c);
      auto im = f.imag.plane(b, c);
      for (int m = 0; m < s.height; ++m) {
        const double ky = angular_wavenumber(m, s.height);
        for (int n = 0; n < s.width; ++n) {
          const double kx = angular_wavenumber(n, s.width);
          const cd factor = std::exp(-p.diffusion * (kx * kx + ky * ky) * p.time) *
                            std::polar(1.0, -(p.vx * kx + p.vy * ky) * p.time);
          const std::size_t i = static_cast<std::size_t>(m) * s.width + n;
          const cd v = cd(re[i], im[i]) * factor;
          re[i] = v.real();
          im[i] = v.imag();
        }
      }
    }
  return idft2<Real>(f, imag_residue);
}

void check_cfl(const DiffusionParams& p, double dt) {
  if (!(dt > 0.0)) throw CflError("CFL: time step must be > 0");
  const double diff = p.diffusion * dt;
  const double conv = std::max(std::fabs(p.vx), std::fabs(p.vy)) * dt;
  if (diff > 0.25) {
    std::ostringstream os;
    os << "CFL violated: D*dt/h^2 = " << diff << " > 0.25";
    throw CflError(os.str());
  }
  if (conv > 0.5) {
    std::ostringstream os;
    os << "CFL violated: max(|vx|,|vy|)*dt/h = " << conv << " > 0.5";
    throw CflError(os.str());
  }
}

template <typename Real>
BasicTensor<Real> fd_step(const BasicTensor<Real>& u, const DiffusionParams& p, double dt,
                          Boundary boundary) {
  p.validate();
  check_cfl(p, dt);
  const int H = u.height(), W = u.width();
  auto wrap = [boundary](int i, int n) {
    if (boundary == Boundary::periodic) return (i % n + n) % n;
    return i < 0 ? 0 : (i >= n ? n - 1 : i);
  };
  BasicTensor<Real> out(u.shape());
  const int planes = u.batch() * u.channels();
#pragma omp parallel for schedule(static)
  for (int pl = 0; pl < planes; ++pl) {
    const int b = pl / u.channels(), c = pl % u.channels();
    auto src = u.plane(b, c);
    auto dst = out.plane(b, c);
    auto at = [&](int i, int j) {
      return static_cast<double>(src[static_cast<std::size_t>(wrap(i, H)) * W + wrap(j, W)]);
    };
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        const double center = at(i, j);
        const double lap = at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1) - 4.0 * center;
        const double dx = 0.5 * (at(i, j + 1) - at(i, j - 1));
        const double dy = 0.5 * (at(i + 1, j) - at(i - 1, j));
        dst[static_cast<std::size_t>(i) * W + j] =
            static_cast<Real>(center + dt * (p.diffusion * lap - p.vx * dx - p.vy * dy));
      }
  }
  return out;
}

template <typename Real>
BasicTensor<Real> fd_rollout(const BasicTensor<Real>& u0, const DiffusionParams& p, double dt,
                             int steps, Boundary boundary) {
  BasicTensor<Real> u = u0;
  for (int s = 0; s < steps; ++s) u = fd_step(u, p, dt, boundary);
  return u;
}

template <typename Real>
BasicTensor<Real> gaussian_bump(int n, double sigma) {
  BasicTensor<Real> g(Shape{1, 1, n, n});
  const double c = 0.5 * (n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double r2 = (i - c) * (i - c) + (j - c) * (j - c);
      g.at(0, 0, i, j) = static_cast<Real>(std::exp(-r2 / (2.0 * sigma * sigma)));
    }
  return g;
}

template <typename Real>
double relative_l2(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  require_same_shape(a.shape(), b.shape(), "relative_l2");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    num += d * d;
    den += static_cast<double>(b[i]) * b[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

#define PLUME_INSTANTIATE_SPECTRAL(R)                                                          \
  template SpectralField<R> dct2(const BasicTensor<R>&);                                       \
  template BasicTensor<R> idct2(const SpectralField<R>&);                                      \
  template SpectralField<R> decay_apply(const SpectralField<R>&, double, const BasicTensor<R>&); \
  template SpectralField<double> dft2(const BasicTensor<R>&);                                  \
  template BasicTensor<R> idft2(const SpectralField<double>&, double*);                        \
  template BasicTensor<R> spectral_solve(const BasicTensor<R>&, const DiffusionParams&, double*); \
  template BasicTensor<R> fd_step(const BasicTensor<R>&, const DiffusionParams&, double, Boundary); \
  template BasicTensor<R> fd_rollout(const BasicTensor<R>&, const DiffusionParams&, double, int, \
                                     Boundary);                                                \
  template BasicTensor<R> gaussian_bump(int, double);                                          \
  template double relative_l2(const BasicTensor<R>&, const BasicTensor<R>&);

PLUME_INSTANTIATE_SPECTRAL(float)
PLUME_INSTANTIATE_SPECTRAL(double)

#undef PLUME_INSTANTIATE_SPECTRAL

}  // namespace plume::spectral
