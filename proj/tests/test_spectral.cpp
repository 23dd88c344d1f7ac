#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "plume/spectral.hpp"

using namespace plume;
using namespace plume::spectral;
using testing::max_abs_diff;
using testing::random_tensor;

namespace {

double energy(const TensorD& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return s;
}

double mass(const TensorD& t) { return std::accumulate(t.data().begin(), t.data().end(), 0.0); }

TensorD circular_shift(const TensorD& u, int dy, int dx) {
  TensorD out(u.shape());
  const int H = u.height(), W = u.width();
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) out.at(0, 0, ((i + dy) % H + H) % H, ((j + dx) % W + W) % W) = u.at(0, 0, i, j);
  return out;
}

TensorD decay_oracle(const TensorD& u0, double alpha) {
  const auto f = spectral::dct2(u0);
  return spectral::idct2(decay_apply(f, alpha, TensorD(Shape{1, u0.channels(), 1, 1}, 1.0)));
}

}  // namespace

TEST_SUITE("dct") {
  TEST_CASE("constant field has only a DC coefficient") {
    const float c = 1.75f;
    const auto f = spectral::dct2(Tensor(Shape{1, 2, 4, 6}, c));
    for (int ch = 0; ch < 2; ++ch)
      for (int u = 0; u < 4; ++u)
        for (int v = 0; v < 6; ++v) {
          const double want = (u == 0 && v == 0) ? c * std::sqrt(24.0) : 0.0;
          CHECK(std::fabs(f.real.at(0, ch, u, v) - want) < 1e-5);
        }
  }

  TEST_CASE("round trip on 64x64") {
    const Tensor x = random_tensor(Shape{1, 2, 64, 64}, 1);
    CHECK(max_abs_diff(spectral::idct2(spectral::dct2(x)), x) < 1e-5);
    SpectralField<float> f;
    f.real = random_tensor(Shape{1, 1, 16, 16}, 2);
    CHECK(max_abs_diff(spectral::dct2(spectral::idct2(f)).real, f.real) < 1e-5);
  }

  TEST_CASE("matches the cosine-sum oracle on 8x8") {
    const TensorD x = random_tensor<double>(Shape{1, 1, 8, 8}, 3);
    const auto want = testing::naive_dct2(x.vec(), 8, 8);
    const auto got = spectral::dct2(x).real;
    CHECK(max_abs_diff(got, want) < 1e-5);
    SpectralField<double> f;
    f.real = x;
    const auto inv = testing::naive_idct2(x.vec(), 8, 8);
    CHECK(max_abs_diff(spectral::idct2(f), inv) < 1e-5);
  }

  TEST_CASE("non-square oracle") {
    const TensorD x = random_tensor<double>(Shape{1, 1, 5, 7}, 4);
    CHECK(max_abs_diff(spectral::dct2(x).real, testing::naive_dct2(x.vec(), 5, 7)) < 1e-9);
  }

  TEST_CASE("DC impulse inverts to all ones") {
    SpectralField<float> f;
    f.real = Tensor(Shape{1, 1, 4, 4});
    f.real.at(0, 0, 0, 0) = 4.0f;
    const Tensor x = spectral::idct2(f);
    for (float v : x.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("inverse rejects a Fourier field") {
    const auto f = spectral::dft2(Tensor(Shape{1, 1, 4, 4}, 1.0f));
    SpectralField<float> g;
    g.basis = Basis::dft2;
    g.real = Tensor(Shape{1, 1, 4, 4});
    CHECK_THROWS_AS(spectral::idct2(g), std::invalid_argument);
    CHECK(f.basis == Basis::dft2);
  }

  TEST_CASE("Parseval") {
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
      const TensorD x = random_tensor<double>(Shape{1, 3, 12, 9}, seed);
      const double ex = energy(x), ef = energy(spectral::dct2(x).real);
      CHECK(std::fabs(ex - ef) / ex < 1e-5);
    }
  }
}

TEST_SUITE("frequency grid") {
  TEST_CASE("1x1") {
    const auto g = freq_grid(1, 1);
    CHECK(g.k2.size() == 1);
    CHECK(g.k2[0] == 0.0);
  }

  TEST_CASE("2x2 corner") { CHECK(freq_grid(2, 2).k2_at(1, 1) == doctest::Approx(M_PI * M_PI / 2)); }

  TEST_CASE("4x8 matches the scalar formula and invariants") {
    const auto g = freq_grid(4, 8);
    for (int ky = 0; ky < 4; ++ky)
      for (int kx = 0; kx < 8; ++kx) {
        const double wx = M_PI * kx / 8.0, wy = M_PI * ky / 4.0;
        CHECK(g.k2_at(ky, kx) == doctest::Approx(wx * wx + wy * wy).epsilon(1e-12));
        if (kx > 0) CHECK(g.k2_at(ky, kx) > g.k2_at(ky, kx - 1));
        if (ky > 0) CHECK(g.k2_at(ky, kx) > g.k2_at(ky - 1, kx));
        CHECK(g.k2_at(ky, kx) < 2 * M_PI * M_PI);
      }
  }

  TEST_CASE("rejects empty grids") { CHECK_THROWS(freq_grid(0, 3)); }
}

TEST_SUITE("decay") {
  TEST_CASE("zero decay with unit weight is the identity") {
    const auto f = spectral::dct2(random_tensor(Shape{1, 2, 6, 6}, 20));
    const auto g = decay_apply(f, 0.0, Tensor(Shape{1, 2, 1, 1}, 1.0f));
    CHECK(testing::bitwise_equal(g.real, f.real));
  }

  TEST_CASE("strong decay leaves the channel mean") {
    const Tensor x = random_tensor(Shape{1, 2, 8, 8}, 21);
    const auto g = decay_apply(spectral::dct2(x), 1e4, Tensor(Shape{1, 2, 1, 1}, 1.0f));
    const Tensor y = spectral::idct2(g);
    for (int c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (float v : x.plane(0, c)) mean += v;
      mean /= 64.0;
      for (float v : y.plane(0, c)) CHECK(std::fabs(v - mean) < 1e-5);
    }
  }

  TEST_CASE("entrywise exp oracle on 8x8") {
    SpectralField<double> f;
    f.real = random_tensor<double>(Shape{1, 2, 8, 8}, 22);
    const TensorD wf(Shape{1, 2, 1, 1}, {0.5, -1.5});
    const auto g = decay_apply(f, 0.5, wf);
    for (int c = 0; c < 2; ++c)
      for (int ky = 0; ky < 8; ++ky)
        for (int kx = 0; kx < 8; ++kx) {
          const double wx = M_PI * kx / 8.0, wy = M_PI * ky / 8.0;
          const double want = f.real.at(0, c, ky, kx) * std::exp(-0.5 * (wx * wx + wy * wy)) * wf[c];
          CHECK(std::fabs(g.real.at(0, c, ky, kx) - want) < 1e-6);
        }
  }

  TEST_CASE("contraction that keeps the DC coefficient") {
    const TensorD x = random_tensor<double>(Shape{1, 3, 10, 10}, 23);
    const auto f = spectral::dct2(x);
    for (double alpha : {0.01, 0.3, 2.0}) {
      const auto g = decay_apply(f, alpha, TensorD(Shape{1, 3, 1, 1}, 1.0));
      CHECK(energy(g.real) <= energy(f.real));
      for (int c = 0; c < 3; ++c) CHECK(g.real.at(0, c, 0, 0) == f.real.at(0, c, 0, 0));
    }
  }

  TEST_CASE("matches reflecting-boundary diffusion") {
    const TensorD u0 = gaussian_bump<double>(32, 3.0);
    DiffusionParams p;
    p.diffusion = 0.25;
    const double alpha = 0.5;  // D t with t = 2
    const TensorD fd = fd_rollout(u0, p, 0.02, 100, Boundary::reflecting);
    CHECK(relative_l2(decay_oracle(u0, alpha), fd) <= 5e-2);
  }
}

TEST_SUITE("spectral solve") {
  TEST_CASE("no motion is the identity") {
    const TensorD u0 = random_tensor<double>(Shape{1, 1, 8, 8}, 30);
    DiffusionParams p;
    p.time = 3.0;
    CHECK(max_abs_diff(spectral_solve(u0, p), u0) < 1e-12);
  }

  TEST_CASE("pure convection is a circular shift") {
    const TensorD u0 = gaussian_bump<double>(16, 2.0);
    DiffusionParams p;
    p.vx = 1.5;
    p.vy = -0.5;
    p.time = 2.0;
    double residue = 1.0;
    const TensorD u = spectral_solve(u0, p, &residue);
    CHECK(max_abs_diff(u, circular_shift(u0, -1, 3)) <= 1e-4);
    CHECK(residue < 1e-5);
  }

  TEST_CASE("semigroup") {
    const TensorD u0 = gaussian_bump<double>(24, 2.5);
    DiffusionParams a{0.3, 0.7, -0.2, 0.8}, b{0.3, 0.7, -0.2, 1.3}, ab{0.3, 0.7, -0.2, 2.1};
    CHECK(max_abs_diff(spectral_solve(spectral_solve(u0, a), b), spectral_solve(u0, ab)) < 1e-4);
  }

  TEST_CASE("agrees with the finite-difference rollout") {
    const TensorD u0 = gaussian_bump<double>(32, 3.0);
    DiffusionParams p;
    p.diffusion = 0.5;
    p.time = 1.0;
    CHECK(relative_l2(spectral_solve(u0, p), fd_rollout(u0, p, 0.01, 100)) <= 2e-2);
    p.vx = 2.0;
    p.vy = 1.0;
    CHECK(relative_l2(spectral_solve(u0, p), fd_rollout(u0, p, 0.01, 100)) <= 2e-2);
  }

  TEST_CASE("Fourier round trip keeps the imaginary residue tiny") {
    const TensorD x = random_tensor<double>(Shape{1, 1, 6, 10}, 31);
    double residue = 1.0;
    CHECK(max_abs_diff(idft2<double>(dft2(x), &residue), x) < 1e-10);
    CHECK(residue < 1e-5);
  }

  TEST_CASE("wavenumbers alias to the centred band") {
    CHECK(angular_wavenumber(0, 8) == 0.0);
    CHECK(angular_wavenumber(1, 8) == doctest::Approx(2 * M_PI / 8));
    CHECK(angular_wavenumber(7, 8) == doctest::Approx(-2 * M_PI / 8));
  }

  TEST_CASE("invalid parameters") {
    DiffusionParams p;
    p.diffusion = -1.0;
    CHECK_THROWS(p.validate());
    p.diffusion = 0.0;
    p.time = -1.0;
    CHECK_THROWS(p.validate());
  }
}

TEST_SUITE("finite differences") {
  TEST_CASE("constant field is a fixed point") {
    const TensorD u(Shape{1, 1, 8, 8}, 2.5);
    DiffusionParams p{0.2, 0.3, -0.4, 0.0};
    for (auto b : {Boundary::periodic, Boundary::reflecting})
      CHECK(max_abs_diff(fd_step(u, p, 1.0, b), u) < 1e-12);
  }

  TEST_CASE("mass is conserved with periodic wrap") {
    TensorD u = random_tensor<double>(Shape{1, 1, 16, 16}, 40, 0.0, 1.0);
    DiffusionParams p{0.2, 0.8, -0.3, 0.0};
    for (int s = 0; s < 10; ++s) {
      const double before = mass(u);
      u = fd_step(u, p, 0.5, Boundary::periodic);
      CHECK(std::fabs(mass(u) - before) < 1e-4);
    }
  }

  TEST_CASE("CFL violations name the bound") {
    DiffusionParams p;
    p.diffusion = 0.5;
    CHECK_NOTHROW(check_cfl(p, 0.5));
    CHECK_THROWS_AS(check_cfl(p, 0.6), CflError);
    CHECK_THROWS_WITH(fd_step(TensorD(Shape{1, 1, 4, 4}), p, 0.6), doctest::Contains("CFL"));
    DiffusionParams q;
    q.vx = 2.0;
    CHECK_THROWS_WITH(check_cfl(q, 0.3), doctest::Contains("CFL"));
    CHECK_NOTHROW(check_cfl(q, 0.25));
  }

  TEST_CASE("gaussian bump is centred and normalized") {
    const TensorD g = gaussian_bump<double>(9, 2.0);
    CHECK(g.at(0, 0, 4, 4) == 1.0);
    CHECK(g.at(0, 0, 0, 4) == doctest::Approx(std::exp(-16.0 / 8.0)));
    CHECK(g.at(0, 0, 3, 4) == g.at(0, 0, 5, 4));
  }
}
