#pragma once

#include <stdexcept>
#include <vector>

#include "plume/tensor.hpp"

namespace plume::spectral {

/// Pixel-indexed DCT frequency grid: omega_x = pi*kx/W, omega_y = pi*ky/H,
/// K^2 = omega_x^2 + omega_y^2. Grid spacing is 1.
struct FrequencyGrid {
  int height = 1;
  int width = 1;
  std::vector<double> omega_x;  // size width
  std::vector<double> omega_y;  // size height
  std::vector<double> k2;       // height x width, row-major

  double k2_at(int ky, int kx) const { return k2[static_cast<std::size_t>(ky) * width + kx]; }

  /// K^2 as a (1, 1, H, W) tensor.
  template <typename Real>
  BasicTensor<Real> k2_tensor() const {
    return BasicTensor<Real>(Shape{1, 1, height, width}, std::vector<Real>(k2.begin(), k2.end()));
  }
};

FrequencyGrid freq_grid(int height, int width);

/// Convection-diffusion coefficients: du/dt = D lap(u) - v . grad(u).
struct DiffusionParams {
  double diffusion = 0.0;  // D >= 0
  double vx = 0.0;         // along the width axis
  double vy = 0.0;         // along the height axis
  double time = 0.0;       // t >= 0

  void validate() const;
};

enum class Basis { dct2, dft2 };

/// Per-channel coefficient grid. `imag` is only populated for dft2.
template <typename Real>
struct SpectralField {
  Basis basis = Basis::dct2;
  BasicTensor<Real> real;
  BasicTensor<Real> imag;
};

template <typename Real>
SpectralField<Real> dct2(const BasicTensor<Real>& x);

/// Throws std::invalid_argument if `f` is not a dct2 field.
template <typename Real>
BasicTensor<Real> idct2(const SpectralField<Real>& f);

/// f[c][ky][kx] * exp(-alpha * K^2[ky][kx]) * w_f[c]; `w_f` is (1, C, 1, 1).
template <typename Real>
SpectralField<Real> decay_apply(const SpectralField<Real>& f, double alpha,
                                const BasicTensor<Real>& w_f);

/// Unnormalized forward 2D DFT per plane (double precision coefficients).
template <typename Real>
SpectralField<double> dft2(const BasicTensor<Real>& x);

/// Inverse of dft2; returns the real part and writes the largest absolute
/// imaginary part to `imag_residue` when non-null.
template <typename Real>
BasicTensor<Real> idft2(const SpectralField<double>& f, double* imag_residue = nullptr);

/// Signed angular wavenumber 2*pi*m/n for DFT index m (aliased to |m| <= n/2).
double angular_wavenumber(int m, int n);

/// Periodic analytic solution: each Fourier mode is multiplied by
/// exp(-D |k|^2 t) * exp(-i (vx kx + vy ky) t).
template <typename Real>
BasicTensor<Real> spectral_solve(const BasicTensor<Real>& u0, const DiffusionParams& p,
                                 double* imag_residue = nullptr);

enum class Boundary { periodic, reflecting };

/// Raised when an explicit step would be unstable.
class CflError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Explicit Euler step u + dt (D lap(u) - v . grad(u)) with the 5-point
/// Laplacian and central first differences. Reflecting mode mirrors the edge
/// sample (half-sample symmetric, the extension implied by DCT-II).
/// Requires D*dt <= 1/4 and max(|vx|,|vy|)*dt <= 1/2.
template <typename Real>
BasicTensor<Real> fd_step(const BasicTensor<Real>& u, const DiffusionParams& p, double dt,
                          Boundary boundary = Boundary::periodic);

/// `steps` applications of fd_step.
template <typename Real>
BasicTensor<Real> fd_rollout(const BasicTensor<Real>& u0, const DiffusionParams& p, double dt,
                             int steps, Boundary boundary = Boundary::periodic);

/// Throws CflError naming the violated bound.
void check_cfl(const DiffusionParams& p, double dt);

/// Centered isotropic Gaussian exp(-r^2 / (2 sigma^2)) on a 1x1xNxN grid,
/// centered at ((N-1)/2, (N-1)/2).
template <typename Real>
BasicTensor<Real> gaussian_bump(int n, double sigma);

/// ||a - b||_2 / ||b||_2 in double precision.
template <typename Real>
double relative_l2(const BasicTensor<Real>& a, const BasicTensor<Real>& b);

}  // namespace plume::spectral
