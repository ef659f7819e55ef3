#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "speckleflow/error.hpp"
#include "speckleflow/gridcore.hpp"

using namespace speckleflow;

namespace {

bool throws_kind(ErrorKind kind, auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind() == kind;
  }
  return false;
}

ScalarGrid random_grid(int nx, int ny, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  ScalarGrid g(nx, ny);
  for (double& v : g.values()) v = d(rng);
  return g;
}

}  // namespace

TEST_SUITE("gridcore") {

TEST_CASE("normalize_intensity log and linear") {
  Volume v(3, 1, 1, std::vector<double>{1, 10, 100});
  const Volume n = normalize_intensity(v, true);
  CHECK(n(0, 0, 0) == doctest::Approx(0.0));
  CHECK(n(1, 0, 0) == doctest::Approx(0.5));
  CHECK(n(2, 0, 0) == doctest::Approx(1.0));

  Volume w(3, 1, 1, std::vector<double>{0, 0.5, 1});
  CHECK(normalize_intensity(w, false) == w);

  Volume c(3, 1, 1, 5.0);
  CHECK(throws_kind(ErrorKind::ConstantField, [&] { normalize_intensity(c, false); }));
  Volume z(2, 1, 1, std::vector<double>{0, 1});
  CHECK(throws_kind(ErrorKind::DomainError, [&] { normalize_intensity(z, true); }));
}

TEST_CASE("normalize_intensity spans the unit interval and is monotone") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(0.01, 50.0);
  Volume v(7, 5, 3);
  for (double& x : v.values()) x = d(rng);
  for (bool log_scale : {false, true}) {
    const Volume n = normalize_intensity(v, log_scale);
    double lo = 1e9, hi = -1e9;
    for (double x : n.values()) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
    for (std::size_t a = 0; a < v.size(); ++a) {
      for (std::size_t b = 0; b < v.size(); b += 7) {
        if (v.values()[a] < v.values()[b]) CHECK(n.values()[a] <= n.values()[b]);
      }
    }
  }
}

TEST_CASE("gaussian_kernel shape") {
  const auto k = gaussian_kernel(1.0);
  CHECK(k.size() == 9);
  double s = 0.0;
  for (double t : k) s += t;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(gaussian_kernel(0.0).size() == 1);
  CHECK(gaussian_kernel(0.3).size() == 5);
  CHECK(throws_kind(ErrorKind::DomainError, [] { gaussian_kernel(-1.0); }));
}

TEST_CASE("gaussian_filter identities") {
  std::mt19937_64 rng(5);
  const ScalarGrid g = random_grid(9, 6, rng);
  CHECK(gaussian_filter(g, 0.0) == g);

  const ScalarGrid c(12, 10, 1.0, 2.5);
  const ScalarGrid fc = gaussian_filter(c, 1.0);
  for (double v : fc.values()) CHECK(v == doctest::Approx(2.5).epsilon(1e-14));

  Volume vc(6, 6, 6, -1.25);
  const Volume fv = gaussian_filter(vc, 1.3);
  for (double v : fv.values()) CHECK(v == doctest::Approx(-1.25).epsilon(1e-14));
  CHECK(throws_kind(ErrorKind::DomainError, [&] { gaussian_filter(g, -0.1); }));
}

TEST_CASE("gaussian_filter impulse matches the direct 2-D kernel") {
  ScalarGrid g(41, 41);
  g(20, 20) = 1.0;
  const double sigma = 1.0;
  const ScalarGrid f = gaussian_filter(g, sigma);
  // Direct evaluation: normalized separable weights at radius 4.
  double norm1 = 0.0;
  for (int k = -4; k <= 4; ++k) norm1 += std::exp(-0.5 * k * k);
  for (int dj = -4; dj <= 4; ++dj) {
    for (int di = -4; di <= 4; ++di) {
      const double expect = std::exp(-0.5 * (di * di + dj * dj)) / (norm1 * norm1);
      CHECK(f(20 + di, 20 + dj) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  CHECK(f(20, 26) == 0.0);
}

TEST_CASE("gaussian_filter reflects at the border and preserves periodic means") {
  // A field that is symmetric under reflection about the border keeps its mean.
  ScalarGrid g(16, 1);
  for (int i = 0; i < 16; ++i) g(i, 0) = std::cos(2 * std::numbers::pi * (i + 0.5) / 16.0) + 3.0;
  const ScalarGrid f = gaussian_filter(g, 1.5);
  double m0 = 0.0, m1 = 0.0;
  for (int i = 0; i < 16; ++i) {
    m0 += g(i, 0);
    m1 += f(i, 0);
  }
  CHECK(m1 == doctest::Approx(m0).epsilon(1e-12));
}

TEST_CASE("pyramid_sigma values") {
  CHECK(pyramid_sigma(0.5, 0.6) == doctest::Approx(1.03923).epsilon(1e-5));
  CHECK(pyramid_sigma(1.0 / std::sqrt(2.0), 0.6) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(pyramid_sigma(1.0 - 1e-12, 0.6) < 1e-5);
  CHECK(throws_kind(ErrorKind::DomainError, [] { pyramid_sigma(1.0, 0.6); }));
  CHECK(throws_kind(ErrorKind::DomainError, [] { pyramid_sigma(0.0, 0.6); }));
  CHECK(throws_kind(ErrorKind::DomainError, [] { pyramid_sigma(0.5, 0.0); }));
}

TEST_CASE("coarse/fine coordinate maps are inverse") {
  for (double x : {0.0, 3.25, 99.0}) {
    CHECK(to_fine(to_coarse(x, 100, 50), 100, 50) == doctest::Approx(x).epsilon(1e-14));
  }
  CHECK(to_coarse(-0.5, 100, 50) == -0.5);
  CHECK(to_coarse(99.5, 100, 50) == doctest::Approx(49.5));
}

TEST_CASE("downsample extents, constants and ramps") {
  const ScalarGrid c(8, 8, 1.0, 0.7);
  const ScalarGrid dc = downsample(c, 0.5, 0.6);
  CHECK(dc.nx() == 4);
  CHECK(dc.ny() == 4);
  for (double v : dc.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-14));

  const ScalarGrid big(100, 100);
  CHECK(downsample(big, 0.5, 0.6).nx() == 50);
  CHECK(throws_kind(ErrorKind::GridTooSmall, [] { downsample(ScalarGrid(2, 5), 0.5, 0.6); }));

  ScalarGrid ramp(40, 20);
  for (int j = 0; j < 20; ++j)
    for (int i = 0; i < 40; ++i) ramp(i, j) = i;
  const ScalarGrid dr = downsample(ramp, 0.5, 0.6);
  // Away from the reflected border the slope doubles per coarse pixel.
  for (int j = 0; j < dr.ny(); ++j) {
    for (int i = 4; i + 5 < dr.nx(); ++i) CHECK(dr(i + 1, j) - dr(i, j) == doctest::Approx(2.0).epsilon(1e-10));
  }
}

TEST_CASE("prolong") {
  VectorGrid c(3, 4);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 3; ++i) {
      c(i, j, 0) = 1.0;
      c(i, j, 1) = 2.0;
    }
  const VectorGrid p = prolong(c, 6, 8, 2.0);
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 6; ++i) {
      CHECK(p(i, j, 0) == doctest::Approx(2.0));
      CHECK(p(i, j, 1) == doctest::Approx(4.0));
    }

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(-1, 1);
  VectorGrid r(2, 2);
  for (double& v : r.values()) v = d(rng);
  CHECK(prolong(r, 2, 2, 1.0) == r);
  CHECK(throws_kind(ErrorKind::DomainError, [&] { prolong(r, 1, 2, 1.0); }));

  VectorGrid corners(2, 2);
  corners(1, 0, 0) = 1.0;
  corners(0, 1, 0) = 1.0;
  corners(1, 1, 0) = 1.0;
  corners(1, 1, 1) = 1.0;
  const Vec2 mid = sample_bilinear(corners, 0.5, 0.5);
  CHECK(mid[0] == doctest::Approx(0.75));
  CHECK(mid[1] == doctest::Approx(0.25));
  ScalarGrid s(2, 2, std::vector<double>{0, 1, 0, 1});
  CHECK(sample_bilinear(s, 0.5, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("downsample then prolong of a constant is the identity") {
  VectorGrid c(20, 14);
  for (int j = 0; j < 14; ++j)
    for (int i = 0; i < 20; ++i) {
      c(i, j, 0) = -0.4;
      c(i, j, 1) = 1.5;
    }
  ScalarGrid c0 = c.component(0);
  ScalarGrid d0 = downsample(c0, 0.5, 0.6);
  VectorGrid coarse(d0, d0);
  const VectorGrid back = prolong(coarse, 20, 14, 1.0);
  for (int j = 0; j < 14; ++j)
    for (int i = 0; i < 20; ++i) CHECK(back(i, j, 0) == doctest::Approx(-0.4).epsilon(1e-14));
}

TEST_CASE("spatial_gradient and temporal_difference") {
  ScalarGrid g(7, 6, 0.5);
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < 7; ++i) g(i, j) = 3.0 * i * 0.5 + 4.0 * j * 0.5 - 2.0;
  const VectorGrid grad = spatial_gradient(g);
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < 7; ++i) {
      CHECK(std::abs(grad(i, j, 0) - 3.0) < 1e-12);
      CHECK(std::abs(grad(i, j, 1) - 4.0) < 1e-12);
    }

  std::mt19937_64 rng(2);
  const ScalarGrid a = random_grid(5, 4, rng);
  const ScalarGrid d0 = temporal_difference(a, a);
  for (double v : d0.values()) CHECK(v == 0.0);
  ScalarGrid zero(5, 4), ramp(5, 4);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 5; ++i) ramp(i, j) = i;
  CHECK(temporal_difference(zero, ramp) == ramp);
  CHECK(throws_kind(ErrorKind::ShapeMismatch, [&] { temporal_difference(a, ScalarGrid(4, 5)); }));
}

TEST_CASE("grid operations are pure") {
  std::mt19937_64 rng(11);
  const ScalarGrid g = random_grid(17, 13, rng);
  CHECK(gaussian_filter(g, 1.1) == gaussian_filter(g, 1.1));
  CHECK(downsample(g, 0.5, 0.6) == downsample(g, 0.5, 0.6));
  CHECK(spatial_gradient(g) == spatial_gradient(g));
}

}  // TEST_SUITE
