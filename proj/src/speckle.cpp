#include "speckleflow/speckle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <tuple>

#include "speckleflow/error.hpp"
#include "speckleflow/gridcore.hpp"

namespace speckleflow::speckle {
namespace {

double otsu_threshold(std::span<const double> values) {
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) return lo;
  constexpr int bins = 256;
  std::array<double, bins> hist{};
  for (double v : values) {
    const int b = std::min(bins - 1, static_cast<int>((v - lo) / (hi - lo) * bins));
    hist[b] += 1.0;
  }
  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (int b = 0; b < bins; ++b) sum_all += b * hist[b];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_bin = 0;
  for (int b = 0; b < bins - 1; ++b) {
    w0 += hist[b];
    sum0 += b * hist[b];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = b;
    }
  }
  return lo + (best_bin + 1) * (hi - lo) / bins;
}

}  // namespace

void validate(const MatchCriteria& c) {
  if (c.epsilon_small < 0 || c.epsilon_large < 0 || c.volume_split < 0 || c.d_max < 0 ||
      c.phi_max < 0 || c.alpha_min < 0 || c.alpha_max < 0 || c.min_voxels < 0) {
    throw Error(ErrorKind::DomainError, "match criteria must be nonnegative");
  }
  if (c.alpha_min > c.alpha_max) {
    throw Error(ErrorKind::DomainError, "alpha_min must not exceed alpha_max");
  }
}

Volume binarize_quantile(const Volume& v, double top_fraction) {
  if (!(top_fraction > 0.0 && top_fraction < 1.0)) {
    throw Error(ErrorKind::DomainError, "top_fraction must lie in (0, 1)");
  }
  std::vector<double> sorted(v.values().begin(), v.values().end());
  const std::size_t n = sorted.size();
  const auto keep = static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(n)));
  Volume out(v.nx(), v.ny(), v.nz());
  if (keep >= n) {
    std::fill(out.values().begin(), out.values().end(), 1.0);
    return out;
  }
  const std::size_t pos = n - keep - 1;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(pos), sorted.end());
  const double threshold = sorted[pos];
  auto src = v.values();
  auto dst = out.values();
  for (std::size_t p = 0; p < n; ++p) dst[p] = src[p] > threshold ? 1.0 : 0.0;
  return out;
}

Labeling connected_components(const Volume& binary) {
  Labeling out{binary.nx(), binary.ny(), binary.nz(), 0, {}};
  const int nx = binary.nx(), ny = binary.ny(), nz = binary.nz();
  out.labels.assign(binary.size(), 0);
  auto src = binary.values();
  const int dz = nz > 1 ? 1 : 0;
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < src.size(); ++seed) {
    if (src[seed] == 0.0 || out.labels[seed] != 0) continue;
    const int label = ++out.count;
    out.labels[seed] = label;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int i = static_cast<int>(p % nx);
      const int j = static_cast<int>((p / nx) % ny);
      const int k = static_cast<int>(p / (static_cast<std::size_t>(nx) * ny));
      for (int c = -dz; c <= dz; ++c) {
        for (int b = -1; b <= 1; ++b) {
          for (int a = -1; a <= 1; ++a) {
            const int ii = i + a, jj = j + b, kk = k + c;
            if (ii < 0 || jj < 0 || kk < 0 || ii >= nx || jj >= ny || kk >= nz) continue;
            const std::size_t q = binary.index(ii, jj, kk);
            if (src[q] != 0.0 && out.labels[q] == 0) {
              out.labels[q] = label;
              stack.push_back(q);
            }
          }
        }
      }
    }
  }
  return out;
}

BubbleSet extract_bubbles(const Labeling& labels, int min_voxels) {
  std::vector<std::array<double, 3>> sums(labels.count + 1, {0.0, 0.0, 0.0});
  std::vector<int> counts(labels.count + 1, 0);
  const std::size_t nx = labels.nx, ny = labels.ny;
  for (std::size_t p = 0; p < labels.labels.size(); ++p) {
    const int l = labels.labels[p];
    if (l == 0) continue;
    sums[l][0] += static_cast<double>(p % nx);
    sums[l][1] += static_cast<double>((p / nx) % ny);
    sums[l][2] += static_cast<double>(p / (nx * ny));
    ++counts[l];
  }
  BubbleSet bubbles;
  for (int l = 1; l <= labels.count; ++l) {
    if (counts[l] < std::max(min_voxels, 1)) continue;
    const double n = counts[l];
    bubbles.push_back({{sums[l][0] / n, sums[l][1] / n, sums[l][2] / n}, counts[l], l});
  }
  return bubbles;
}

CylinderGeometry fit_circle(std::span<const Vec2> points) {
  if (points.size() < 3) throw Error(ErrorKind::FitError, "circle fit needs at least 3 points");
  // Centre the data for conditioning; solve x^2 + y^2 + D x + E y + F = 0.
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p[0];
    my += p[1];
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());
  Eigen::MatrixXd design(points.size(), 3);
  Eigen::VectorXd rhs(points.size());
  for (std::size_t r = 0; r < points.size(); ++r) {
    const double x = points[r][0] - mx, y = points[r][1] - my;
    design(r, 0) = x;
    design(r, 1) = y;
    design(r, 2) = 1.0;
    rhs(r) = -(x * x + y * y);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw Error(ErrorKind::FitError, "circle fit points are collinear");
  const Eigen::Vector3d sol = qr.solve(rhs);
  const double cx = -0.5 * sol(0), cy = -0.5 * sol(1);
  const double r2 = cx * cx + cy * cy - sol(2);
  if (!(r2 > 0.0)) throw Error(ErrorKind::FitError, "degenerate circle fit");
  return {{cx + mx, cy + my}, std::sqrt(r2)};
}

CylinderGeometry fit_circle(const ScalarGrid& mask) {
  std::vector<Vec2> boundary;
  const int nx = mask.nx(), ny = mask.ny();
  auto set = [&](int i, int j) {
    return i >= 0 && j >= 0 && i < nx && j < ny && mask(i, j) != 0.0;
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (!set(i, j)) continue;
      if (!set(i - 1, j) || !set(i + 1, j) || !set(i, j - 1) || !set(i, j + 1)) {
        boundary.push_back({static_cast<double>(i), static_cast<double>(j)});
      }
    }
  }
  return fit_circle(boundary);
}

CylinderGeometry estimate_geometry(const Volume& v) {
  const int nx = v.nx(), ny = v.ny(), nz = v.nz();
  if (nz == 1) {
    return {{0.5 * (nx - 1), 0.5 * (ny - 1)}, 0.5 * nx};
  }
  ScalarGrid projection(nx, ny);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) projection(i, j) += v(i, j, k) / nz;
    }
  }
  const double threshold = otsu_threshold(projection.values());
  ScalarGrid mask(nx, ny);
  for (std::size_t p = 0; p < mask.size(); ++p) {
    mask.values()[p] = projection.values()[p] >= threshold ? 1.0 : 0.0;
  }
  return fit_circle(mask);
}

PairMeasures measure_pair(const Bubble& a, const Bubble& b, const CylinderGeometry& geom_a,
                          const CylinderGeometry& geom_b, const MatchCriteria& crit, int dims) {
  PairMeasures m;
  m.volume_difference = std::abs(a.voxel_volume - b.voxel_volume);
  m.epsilon = a.voxel_volume < crit.volume_split ? crit.epsilon_small : crit.epsilon_large;
  const double dx = b.centroid[0] - a.centroid[0];
  const double dy = b.centroid[1] - a.centroid[1];
  const double dz = b.centroid[2] - a.centroid[2];
  m.distance = std::sqrt(dx * dx + dy * dy + dz * dz);
  if (dims == 3) {
    const double ax = a.centroid[0] - geom_a.center_xy[0], ay = a.centroid[1] - geom_a.center_xy[1];
    const double bx = b.centroid[0] - geom_b.center_xy[0], by = b.centroid[1] - geom_b.center_xy[1];
    m.axis_distance_a = std::hypot(ax, ay);
    m.axis_distance_b = std::hypot(bx, by);
    m.axial_a = a.centroid[2];
    m.axial_b = b.centroid[2];
    const double cross = ax * by - ay * bx;
    const double dot = ax * bx + ay * by;
    m.phi = (m.axis_distance_a > 0.0 && m.axis_distance_b > 0.0) ? std::atan2(std::abs(cross), dot)
                                                                  : 0.0;
    m.alpha = m.distance > 0.0 ? std::acos(std::clamp(dz / m.distance, -1.0, 1.0)) : 0.0;
  } else {
    m.axis_distance_a = std::abs(a.centroid[0] - geom_a.center_xy[0]);
    m.axis_distance_b = std::abs(b.centroid[0] - geom_b.center_xy[0]);
    m.axial_a = a.centroid[1];
    m.axial_b = b.centroid[1];
    m.phi = 0.0;
    m.alpha = m.distance > 0.0 ? std::acos(std::clamp(dy / m.distance, -1.0, 1.0)) : 0.0;
  }
  return m;
}

bool satisfies_criteria(const PairMeasures& m, const MatchCriteria& crit, int dims) {
  return m.volume_difference < m.epsilon && m.distance > 0.0 && m.distance <= crit.d_max &&
         m.axis_distance_a < m.axis_distance_b && m.axial_a < m.axial_b &&
         (dims == 2 || m.phi < crit.phi_max) && crit.alpha_min <= m.alpha &&
         m.alpha <= crit.alpha_max;
}

SampleList match_bubbles(const BubbleSet& a, const BubbleSet& b, const CylinderGeometry& geom_a,
                         const CylinderGeometry& geom_b, const MatchCriteria& crit, int dims) {
  validate(crit);
  if (dims != 2 && dims != 3) throw Error(ErrorKind::DomainError, "dims must be 2 or 3");
  struct Candidate {
    double distance;
    double volume_difference;
    int label_a, label_b;
    std::size_t ia, ib;
  };
  std::vector<Candidate> candidates;
  for (std::size_t ia = 0; ia < a.size(); ++ia) {
    for (std::size_t ib = 0; ib < b.size(); ++ib) {
      const PairMeasures m = measure_pair(a[ia], b[ib], geom_a, geom_b, crit, dims);
      if (satisfies_criteria(m, crit, dims)) {
        candidates.push_back({m.distance, m.volume_difference, a[ia].label, b[ib].label, ia, ib});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    return std::tie(x.distance, x.volume_difference, x.label_a, x.label_b) <
           std::tie(y.distance, y.volume_difference, y.label_a, y.label_b);
  });
  std::vector<bool> used_a(a.size(), false), used_b(b.size(), false);
  SampleList samples;
  for (const auto& c : candidates) {
    if (used_a[c.ia] || used_b[c.ib]) continue;
    used_a[c.ia] = used_b[c.ib] = true;
    const Vec3& pa = a[c.ia].centroid;
    const Vec3& pb = b[c.ib].centroid;
    samples.push_back({pa, {pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]}});
  }
  std::sort(samples.begin(), samples.end(), [](const auto& x, const auto& y) {
    return std::tie(x.position, x.displacement) < std::tie(y.position, y.displacement);
  });
  return samples;
}

BubbleSet detect_bubbles(const Volume& v, const MatchCriteria& crit, const TrackingOptions& opt) {
  const auto [lo, hi] = std::minmax_element(v.values().begin(), v.values().end());
  if (!(*hi > *lo)) return {};
  const Volume smooth = gaussian_filter(normalize_intensity(v, opt.log_scale), opt.presmooth_sigma);
  return extract_bubbles(connected_components(binarize_quantile(smooth, opt.top_fraction)),
                         crit.min_voxels);
}

SampleList run_tracking(const Volume& v1, const Volume& v2, const MatchCriteria& crit,
                        const TrackingOptions& opt) {
  if (!v1.same_shape(v2)) throw Error(ErrorKind::ShapeMismatch, "volume extents differ");
  validate(crit);
  const BubbleSet a = detect_bubbles(v1, crit, opt);
  const BubbleSet b = detect_bubbles(v2, crit, opt);
  if (a.empty() || b.empty()) return {};
  auto geometry = [&](const Volume& v, const std::optional<CylinderGeometry>& given) {
    if (given) return *given;
    return estimate_geometry(gaussian_filter(normalize_intensity(v, opt.log_scale),
                                             opt.presmooth_sigma));
  };
  const CylinderGeometry ga = geometry(v1, opt.geometry_a);
  const CylinderGeometry gb = geometry(v2, opt.geometry_b);
  return match_bubbles(a, b, ga, gb, crit, v1.nz() == 1 ? 2 : 3);
}

SampleList run_tracking(const Volume& v1, const Volume& v2, const MatchCriteria& crit,
                        double top_fraction, double presmooth_sigma) {
  TrackingOptions opt;
  opt.top_fraction = top_fraction;
  opt.presmooth_sigma = presmooth_sigma;
  return run_tracking(v1, v2, crit, opt);
}

TrackingConfig parse_tracking_config(const io::KeyValues& kv) {
  io::ConfigReader r(kv);
  TrackingConfig cfg;
  MatchCriteria& c = cfg.criteria;
  c.epsilon_small = r.get_double("epsilon_small", c.epsilon_small);
  c.epsilon_large = r.get_double("epsilon_large", c.epsilon_large);
  c.volume_split = r.get_int("volume_split", c.volume_split);
  c.d_max = r.get_double("d_max", c.d_max);
  c.phi_max = r.get_double("phi_max", c.phi_max);
  c.alpha_min = r.get_double("alpha_min", c.alpha_min);
  c.alpha_max = r.get_double("alpha_max", c.alpha_max);
  c.min_voxels = r.get_int("min_voxels", c.min_voxels);
  TrackingOptions& o = cfg.options;
  o.top_fraction = r.get_double("top_fraction", o.top_fraction);
  o.presmooth_sigma = r.get_double("presmooth_sigma", o.presmooth_sigma);
  o.log_scale = r.get_bool("log_scale", o.log_scale);
  r.reject_unknown();
  validate(c);
  return cfg;
}

}  // namespace speckleflow::speckle
