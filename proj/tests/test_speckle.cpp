#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "speckleflow/error.hpp"
#include "speckleflow/phantom.hpp"
#include "speckleflow/speckle.hpp"

using namespace speckleflow;
using namespace speckleflow::speckle;
using speckle::Bubble;
using speckle::CylinderGeometry;
using speckle::MatchCriteria;

namespace {

// Flood fill with an explicit queue over the full neighbourhood; labels
// grow in scan order like the library's.
std::vector<int> flood_fill(const Volume& v, int& count) {
  std::vector<int> lab(v.size(), 0);
  count = 0;
  const int dz = v.nz() > 1 ? 1 : 0;
  for (int k = 0; k < v.nz(); ++k)
    for (int j = 0; j < v.ny(); ++j)
      for (int i = 0; i < v.nx(); ++i) {
        if (v(i, j, k) == 0.0 || lab[v.index(i, j, k)]) continue;
        ++count;
        std::vector<std::array<int, 3>> queue{{i, j, k}};
        lab[v.index(i, j, k)] = count;
        for (std::size_t h = 0; h < queue.size(); ++h) {
          const auto [a, b, c] = queue[h];
          for (int z = c - dz; z <= c + dz; ++z)
            for (int y = b - 1; y <= b + 1; ++y)
              for (int x = a - 1; x <= a + 1; ++x) {
                if (x < 0 || y < 0 || z < 0 || x >= v.nx() || y >= v.ny() || z >= v.nz()) continue;
                const auto q = v.index(x, y, z);
                if (v(x, y, z) != 0.0 && !lab[q]) {
                  lab[q] = count;
                  queue.push_back({x, y, z});
                }
              }
        }
      }
  return lab;
}

Volume random_binary(int nx, int ny, int nz, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution d(density);
  Volume v(nx, ny, nz);
  for (double& x : v.values()) x = d(rng) ? 1.0 : 0.0;
  return v;
}

MatchCriteria loose() {
  MatchCriteria c;
  c.epsilon_small = 5;
  c.d_max = 10;
  c.alpha_min = 0;
  c.alpha_max = 0.6;
  c.phi_max = 0.2;
  return c;
}

}  // namespace

TEST_SUITE("speckle") {

TEST_CASE("binarize_quantile") {
  Volume v(10, 1, 1);
  for (int i = 0; i < 10; ++i) v(i, 0, 0) = 0.1 * (i + 1);
  const Volume b = binarize_quantile(v, 0.2);
  for (int i = 0; i < 10; ++i) CHECK(b(i, 0, 0) == (i >= 8 ? 1.0 : 0.0));

  const Volume c = binarize_quantile(Volume(4, 4, 2, 0.3), 0.1);
  for (double x : c.values()) CHECK(x == 0.0);

  std::mt19937_64 rng(3);
  std::vector<double> vals(1000);
  std::iota(vals.begin(), vals.end(), 0.0);
  std::shuffle(vals.begin(), vals.end(), rng);
  Volume w(10, 10, 10, vals);
  const Volume bw = binarize_quantile(w, 0.005);
  CHECK(std::count(bw.values().begin(), bw.values().end(), 1.0) == 5);
  for (std::size_t p = 0; p < w.size(); ++p) CHECK((bw.values()[p] == 1.0) == (w.values()[p] >= 995));

  CHECK_THROWS_AS(binarize_quantile(v, 0.0), Error);
  CHECK_THROWS_AS(binarize_quantile(v, 1.0), Error);
}

TEST_CASE("binarize_quantile never exceeds the requested count") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> d(0, 20);
  for (int trial = 0; trial < 20; ++trial) {
    Volume v(13, 7, 3);
    for (double& x : v.values()) x = d(rng);
    const double f = 0.05 + 0.04 * trial;
    const Volume b = binarize_quantile(v, f);
    const auto ones = std::count(b.values().begin(), b.values().end(), 1.0);
    CHECK(ones <= static_cast<long>(std::ceil(f * v.size())));
  }
}

TEST_CASE("connected_components basics") {
  Volume two(5, 5, 5);
  two(0, 0, 0) = 1;
  two(4, 4, 4) = 1;
  CHECK(connected_components(two).count == 2);

  Volume diag(3, 3, 3);
  diag(0, 0, 0) = 1;
  diag(1, 1, 1) = 1;
  const auto l = connected_components(diag);
  CHECK(l.count == 1);

  Volume plane(3, 3, 1);
  plane(0, 0, 0) = 1;
  plane(1, 1, 0) = 1;
  CHECK(connected_components(plane).count == 1);

  Volume first(4, 1, 1, std::vector<double>{0, 1, 0, 1});
  const auto lf = connected_components(first);
  CHECK(lf.labels == std::vector<std::int32_t>{0, 1, 0, 2});
}

TEST_CASE("connected_components agrees with flood fill up to 16^3") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const int nx = 1 + trial % 16, ny = 1 + (trial * 7) % 16, nz = 1 + (trial * 5) % 16;
    const Volume v = random_binary(nx, ny, nz, 0.1 + 0.02 * (trial % 10), rng);
    int count = 0;
    const auto oracle = flood_fill(v, count);
    const auto l = connected_components(v);
    CHECK(l.count == count);
    CHECK(std::equal(oracle.begin(), oracle.end(), l.labels.begin()));
  }
}

TEST_CASE("extract_bubbles centroids, volumes and floor") {
  Volume v(6, 6, 2);
  v(0, 0, 0) = v(1, 0, 0) = v(0, 1, 0) = v(1, 1, 0) = 1;
  const auto b = extract_bubbles(connected_components(v), 1);
  REQUIRE(b.size() == 1);
  CHECK(b[0].voxel_volume == 4);
  CHECK(b[0].centroid[0] == 0.5);
  CHECK(b[0].centroid[1] == 0.5);
  CHECK(b[0].centroid[2] == 0.0);

  Volume big(79, 1, 1, 1.0);
  CHECK(extract_bubbles(connected_components(big), 80).empty());
  CHECK(extract_bubbles(connected_components(big), 79).size() == 1);
}

TEST_CASE("extract_bubbles volumes match flood fill on random blobs") {
  std::mt19937_64 rng(5);
  const Volume v = random_binary(16, 16, 16, 0.18, rng);
  int count = 0;
  const auto oracle = flood_fill(v, count);
  std::vector<int> sizes(count + 1, 0);
  for (int l : oracle) sizes[l]++;
  const auto bubbles = extract_bubbles(connected_components(v), 1);
  CHECK(static_cast<int>(bubbles.size()) == count);
  for (const auto& b : bubbles) CHECK(b.voxel_volume == sizes[b.label]);
}

TEST_CASE("fit_circle") {
  ScalarGrid mask(64, 64);
  for (int j = 0; j < 64; ++j)
    for (int i = 0; i < 64; ++i)
      if (std::hypot(i - 32.0, j - 32.0) <= 20.0) mask(i, j) = 1;
  const auto g = speckle::fit_circle(mask);
  CHECK(std::abs(g.center_xy[0] - 32) < 0.5);
  CHECK(std::abs(g.center_xy[1] - 32) < 0.5);
  CHECK(std::abs(g.radius - 20) < 0.5);

  const auto full = speckle::fit_circle(ScalarGrid(20, 12, 1.0, 1.0));
  CHECK(full.center_xy[0] == doctest::Approx(9.5));
  CHECK(full.center_xy[1] == doctest::Approx(5.5));

  // Circumscribed circle of three points in closed form.
  const Vec2 p[3] = {{1, 0}, {4, 3}, {-2, 5}};
  const double d = 2 * (p[0][0] * (p[1][1] - p[2][1]) + p[1][0] * (p[2][1] - p[0][1]) + p[2][0] * (p[0][1] - p[1][1]));
  auto sq = [](const Vec2& q) { return q[0] * q[0] + q[1] * q[1]; };
  const double ux = (sq(p[0]) * (p[1][1] - p[2][1]) + sq(p[1]) * (p[2][1] - p[0][1]) + sq(p[2]) * (p[0][1] - p[1][1])) / d;
  const double uy = (sq(p[0]) * (p[2][0] - p[1][0]) + sq(p[1]) * (p[0][0] - p[2][0]) + sq(p[2]) * (p[1][0] - p[0][0])) / d;
  const auto three = speckle::fit_circle(std::span<const Vec2>(p, 3));
  CHECK(std::abs(three.center_xy[0] - ux) < 1e-9);
  CHECK(std::abs(three.center_xy[1] - uy) < 1e-9);
  CHECK(std::abs(three.radius - std::hypot(p[0][0] - ux, p[0][1] - uy)) < 1e-9);

  const Vec2 line[3] = {{0, 0}, {1, 1}, {2, 2}};
  CHECK_THROWS_AS(speckle::fit_circle(std::span<const Vec2>(line, 3)), Error);
  CHECK_THROWS_AS(speckle::fit_circle(std::span<const Vec2>(line, 2)), Error);
}

TEST_CASE("match_bubbles rules") {
  const CylinderGeometry axis{{0, 0}, 20};
  const MatchCriteria c = loose();
  // Purely axial motion keeps the axis distance equal, so the strict
  // bulging inequality rejects it.
  Bubble a{{10, 10, 5}, 100, 1}, b{{10, 10, 8}, 102, 1};
  CHECK(speckle::match_bubbles({a}, {b}, axis, axis, c).empty());
  const auto m = speckle::measure_pair(a, b, axis, axis, c, 3);
  CHECK(m.volume_difference < m.epsilon);
  CHECK(m.distance == doctest::Approx(3.0));
  CHECK(m.alpha == doctest::Approx(0.0));
  CHECK(m.phi == doctest::Approx(0.0));

  // With a slight outward bulge every inequality holds.
  Bubble bulged{{10.2, 10.2, 8}, 102, 1};
  const auto s = speckle::match_bubbles({a}, {bulged}, axis, axis, c);
  REQUIRE(s.size() == 1);
  CHECK(s[0].displacement[0] == doctest::Approx(0.2));
  CHECK(s[0].displacement[2] == doctest::Approx(3.0));

  Bubble same_z{{10.2, 10.2, 5}, 100, 1};
  CHECK(speckle::match_bubbles({a}, {same_z}, axis, axis, c).empty());
  Bubble inward{{9.8, 9.8, 8}, 100, 1};
  CHECK(speckle::match_bubbles({a}, {inward}, axis, axis, c).empty());
  Bubble far{{10.5, 10.5, 20}, 100, 1};
  CHECK(speckle::match_bubbles({a}, {far}, axis, axis, c).empty());
  Bubble volume_off{{10.2, 10.2, 8}, 110, 1};
  CHECK(speckle::match_bubbles({a}, {volume_off}, axis, axis, c).empty());
  // Rotation about the axis by 0.3 rad breaks only the tangential rule.
  const double r = std::hypot(10.0, 10.0) * 1.02, t = std::numbers::pi / 4 + 0.3;
  Bubble tangential{{r * std::cos(t), r * std::sin(t), 8}, 100, 1};
  MatchCriteria wide = c;
  wide.alpha_max = 1.5;
  const auto mt = speckle::measure_pair(a, tangential, axis, axis, wide, 3);
  CHECK(mt.phi == doctest::Approx(0.3));
  CHECK(!speckle::satisfies_criteria(mt, wide, 3));
  wide.phi_max = 0.35;
  CHECK(speckle::satisfies_criteria(mt, wide, 3));
}

TEST_CASE("match_bubbles is one-to-one and picks the nearest") {
  const CylinderGeometry axis{{0, 0}, 50};
  const MatchCriteria c = loose();
  Bubble a1{{10, 0, 5}, 100, 1}, a2{{10.1, 0, 5.2}, 100, 2};
  Bubble b1{{10.3, 0, 8}, 100, 1}, b2{{10.4, 0, 9.5}, 100, 2};
  const auto s = speckle::match_bubbles({a1, a2}, {b1, b2}, axis, axis, c);
  REQUIRE(s.size() == 2);
  std::set<std::array<double, 3>> targets;
  for (const auto& x : s) {
    targets.insert({x.position[0] + x.displacement[0], x.position[1] + x.displacement[1],
                    x.position[2] + x.displacement[2]});
  }
  CHECK(targets.size() == 2);
  // a2 is nearer to b1 than a1, so greedy pairs (a2, b1) first.
  const auto& first = s[0].position[0] == 10.0 ? s[1] : s[0];
  CHECK(first.position[0] == 10.1);
  CHECK(first.displacement[2] == doctest::Approx(2.8));
}

TEST_CASE("match_bubbles ignores the input order") {
  const CylinderGeometry axis{{0, 0}, 50};
  MatchCriteria c = loose();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-20, 20);
  speckle::BubbleSet a, b;
  for (int k = 0; k < 30; ++k) {
    Bubble x{{u(rng), u(rng), 10 + u(rng) * 0.2}, 100, k + 1};
    Bubble y = x;
    y.centroid[0] *= 1.03;
    y.centroid[1] *= 1.03;
    y.centroid[2] += 2.0;
    a.push_back(x);
    b.push_back(y);
  }
  const auto s1 = speckle::match_bubbles(a, b, axis, axis, c);
  std::reverse(a.begin(), a.end());
  std::shuffle(b.begin(), b.end(), rng);
  CHECK(speckle::match_bubbles(a, b, axis, axis, c) == s1);
}

TEST_CASE("planar matching uses y as the compression axis") {
  const CylinderGeometry g{{50, 50}, 50};
  MatchCriteria c = loose();
  Bubble a{{60, 30, 0}, 100, 1}, b{{60.4, 33, 0}, 101, 1};
  const auto s = speckle::match_bubbles({a}, {b}, g, g, c, 2);
  REQUIRE(s.size() == 1);
  CHECK(s[0].displacement[1] == doctest::Approx(3.0));
  CHECK_THROWS_AS(speckle::match_bubbles({a}, {b}, g, g, c, 4), Error);
}

TEST_CASE("run_tracking on a planted phantom") {
  phantom::PhantomSpec spec;
  spec.kind = phantom::Kind::Tracking;
  spec.nx = spec.ny = 96;
  spec.nz = 64;
  spec.bubble_count = 50;
  spec.bubble_sigma_min = 2.5;
  spec.bubble_sigma_max = 3.0;
  spec.radial_bulge = 0.5;
  const auto p = phantom::make_tracking_phantom(spec);
  MatchCriteria c;
  speckle::TrackingOptions opt;
  opt.top_fraction = 0.012;
  const auto s = speckle::run_tracking(p.v1, p.v2, c, opt);
  CHECK(s.size() >= 45);
  CHECK(s.size() <= 50);
  for (const auto& x : s) {
    CHECK(std::abs(x.displacement[2] - 3.0) <= 0.5);
    CHECK(std::hypot(x.displacement[0], x.displacement[1]) <= 0.75);
  }

  const Volume zero(8, 8, 8);
  CHECK(speckle::run_tracking(zero, zero, c, 0.01, 0.9).empty());
  CHECK_THROWS_AS(speckle::run_tracking(zero, Volume(8, 8, 9), c, 0.01, 0.9), Error);
}

TEST_CASE("tracking config parsing") {
  const auto cfg = speckle::parse_tracking_config({{"d_max", "7"}, {"top_fraction", "0.005"}, {"log_scale", "true"}});
  CHECK(cfg.criteria.d_max == 7);
  CHECK(cfg.options.top_fraction == 0.005);
  CHECK(cfg.options.log_scale);
  CHECK_THROWS_AS(speckle::parse_tracking_config({{"dmax", "7"}}), Error);
  CHECK_THROWS_AS(speckle::parse_tracking_config({{"alpha_min", "1"}, {"alpha_max", "0.5"}}), Error);
}

}  // TEST_SUITE
