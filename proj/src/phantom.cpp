#include "speckleflow/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "speckleflow/error.hpp"
#include "speckleflow/gridcore.hpp"

namespace speckleflow::phantom {
namespace {

struct Blob {
  double x, y, z;
  double sigma;
  double amplitude;
};

/// Sum of isotropic Gaussian blobs, binned in the plane so that point
/// evaluation only visits nearby blobs.
class BlobField {
 public:
  BlobField(std::vector<Blob> blobs, int nx, int ny) : blobs_(std::move(blobs)) {
    bx_ = std::max(1, (nx + kBin - 1) / kBin + 2);
    by_ = std::max(1, (ny + kBin - 1) / kBin + 2);
    bins_.resize(static_cast<std::size_t>(bx_) * by_);
    for (std::size_t b = 0; b < blobs_.size(); ++b) {
      const Blob& blob = blobs_[b];
      const double reach = 4 * blob.sigma;
      for (int q = bin(blob.y - reach, by_); q <= bin(blob.y + reach, by_); ++q) {
        for (int p = bin(blob.x - reach, bx_); p <= bin(blob.x + reach, bx_); ++p) {
          bins_[static_cast<std::size_t>(q) * bx_ + p].push_back(b);
        }
      }
    }
  }

  double operator()(double x, double y, double z = 0.0) const {
    double v = 0.0;
    for (std::size_t b : bins_[static_cast<std::size_t>(bin(y, by_)) * bx_ + bin(x, bx_)]) {
      const Blob& blob = blobs_[b];
      const double d2 = (x - blob.x) * (x - blob.x) + (y - blob.y) * (y - blob.y) +
                        (z - blob.z) * (z - blob.z);
      const double s2 = blob.sigma * blob.sigma;
      if (d2 <= 16 * s2) v += blob.amplitude * std::exp(-d2 / (2 * s2));
    }
    return v;
  }

 private:
  static constexpr int kBin = 8;
  // Bins are offset by one so that slightly negative coordinates stay valid.
  static int bin(double c, int count) {
    return std::clamp(static_cast<int>(std::floor(c / kBin)) + 1, 0, count - 1);
  }

  std::vector<Blob> blobs_;
  int bx_ = 1, by_ = 1;
  std::vector<std::vector<std::size_t>> bins_;
};

/// Fraction of [c - 1/2, c + 1/2) covered by [lo, hi).
double coverage(double c, double lo, double hi) {
  return std::clamp(std::min(c + 0.5, hi) - std::max(c - 0.5, lo), 0.0, 1.0);
}

Vec3 perturb(const Vec3& u, double noise_rel, Rng& rng, int dims) {
  if (noise_rel == 0.0) return u;
  const double mag = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  // Uniform direction and radius up to noise_rel * |u|.
  Vec3 dir{rng.normal(), rng.normal(), dims == 3 ? rng.normal() : 0.0};
  const double dn = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
  const double r = noise_rel * mag * rng.uniform();
  Vec3 out = u;
  if (dn > 0) {
    for (int c = 0; c < 3; ++c) out[c] += r * dir[c] / dn;
  }
  return out;
}

void rescale_jointly(ScalarGrid& a, ScalarGrid& b) {
  double hi = 0.0;
  for (double v : a.values()) hi = std::max(hi, v);
  for (double v : b.values()) hi = std::max(hi, v);
  if (hi <= 0.0) return;
  for (double& v : a.values()) v /= hi;
  for (double& v : b.values()) v /= hi;
}

/// Rejection sampling of blob centres that keep a separation proportional
/// to their widths.
template <typename Draw>
std::vector<Blob> place_blobs(int count, double min_sep_factor, Draw&& draw) {
  std::vector<Blob> blobs;
  const int max_attempts = 2000 * std::max(count, 1);
  for (int attempt = 0; static_cast<int>(blobs.size()) < count; ++attempt) {
    if (attempt >= max_attempts) {
      throw Error(ErrorKind::SpecError, "cannot place the requested bubbles without overlap");
    }
    const std::optional<Blob> drawn = draw();
    if (!drawn) continue;
    const Blob& c = *drawn;
    const bool clear = std::all_of(blobs.begin(), blobs.end(), [&](const Blob& o) {
      const double d2 = (c.x - o.x) * (c.x - o.x) + (c.y - o.y) * (c.y - o.y) + (c.z - o.z) * (c.z - o.z);
      const double sep = min_sep_factor * (c.sigma + o.sigma);
      return d2 >= sep * sep;
    });
    if (clear) blobs.push_back(c);
  }
  return blobs;
}

std::vector<Blob> background_speckle(const PhantomSpec& spec, Rng& rng) {
  std::vector<Blob> out;
  out.reserve(static_cast<std::size_t>(spec.speckle_count));
  for (int s = 0; s < spec.speckle_count; ++s) {
    const double x = rng.uniform(0.0, spec.nx - 1.0);
    const double y = rng.uniform(0.0, spec.ny - 1.0);
    const double sigma = rng.uniform(0.8, 1.2);
    out.push_back({x, y, 0.0, sigma, spec.speckle_amplitude * rng.uniform(0.5, 1.0)});
  }
  return out;
}

void check_common(const PhantomSpec& spec) {
  if (spec.nx < 8 || spec.ny < 8 || spec.nz < 1) throw Error(ErrorKind::SpecError, "phantom extents too small");
  if (spec.bubble_count < 0 || spec.speckle_count < 0) {
    throw Error(ErrorKind::SpecError, "bubble counts must be nonnegative");
  }
  if (!(spec.bubble_sigma_min > 0) || spec.bubble_sigma_max < spec.bubble_sigma_min) {
    throw Error(ErrorKind::SpecError, "invalid bubble width range");
  }
  if (!(spec.noise_rel >= 0)) throw Error(ErrorKind::SpecError, "noise_rel must be nonnegative");
}

}  // namespace

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
}

Kind parse_kind(const std::string& name) {
  if (name == "moving_squares") return Kind::MovingSquares;
  if (name == "inclusion") return Kind::Inclusion;
  if (name == "tracking") return Kind::Tracking;
  throw Error(ErrorKind::FormatError, "unknown phantom kind '" + name + "'");
}

PhantomSpec parse_phantom_spec(const io::KeyValues& kv) {
  io::ConfigReader r(kv);
  PhantomSpec s;
  s.kind = parse_kind(r.get_string("kind", "moving_squares"));
  if (s.kind == Kind::Inclusion) {
    s.nx = s.ny = 200;
    s.bubble_count = 200;
  }
  s.nx = r.get_int("nx", s.nx);
  s.ny = r.get_int("ny", s.ny);
  s.nz = r.get_int("nz", s.nz);
  s.bubble_count = r.get_int("bubble_count", s.bubble_count);
  s.bubble_sigma_min = r.get_double("bubble_sigma_min", s.bubble_sigma_min);
  s.bubble_sigma_max = r.get_double("bubble_sigma_max", s.bubble_sigma_max);
  s.seed = static_cast<std::uint64_t>(std::stoull(r.get_string("seed", std::to_string(s.seed))));
  s.noise_rel = r.get_double("noise_rel", s.noise_rel);
  s.speckle_count = r.get_int("speckle_count", s.speckle_count);
  s.speckle_amplitude = r.get_double("speckle_amplitude", s.speckle_amplitude);
  s.square_size = r.get_int("square_size", s.square_size);
  s.square_gap = r.get_int("square_gap", s.square_gap);
  s.shift = r.get_double("shift", s.shift);
  s.compression_px = r.get_double("compression_px", s.compression_px);
  s.lambda_background = r.get_double("lambda_background", s.lambda_background);
  s.mu_background = r.get_double("mu_background", s.mu_background);
  s.lambda_inclusion = r.get_double("lambda_inclusion", s.lambda_inclusion);
  s.mu_inclusion = r.get_double("mu_inclusion", s.mu_inclusion);
  s.inclusion_cx = r.get_double("inclusion_cx", s.inclusion_cx);
  s.inclusion_cy = r.get_double("inclusion_cy", s.inclusion_cy);
  s.inclusion_radius = r.get_double("inclusion_radius", s.inclusion_radius);
  s.mask_band = r.get_int("mask_band", s.mask_band);
  s.cylinder_radius = r.get_double("cylinder_radius", s.cylinder_radius);
  s.background = r.get_double("background", s.background);
  s.axial_shift = r.get_double("axial_shift", s.axial_shift);
  s.radial_bulge = r.get_double("radial_bulge", s.radial_bulge);
  r.reject_unknown();
  return s;
}

MovingSquares make_moving_squares(const PhantomSpec& spec) {
  check_common(spec);
  const int size = spec.square_size;
  if (size < 4 || spec.square_gap < 0) throw Error(ErrorKind::SpecError, "invalid square layout");
  const double left_a = std::floor((spec.nx - (2.0 * size + spec.square_gap)) / 2.0);
  const double top = std::floor((spec.ny - size) / 2.0);
  const double left_b = left_a + size + spec.square_gap;
  if (left_a < 1 || top < 1) throw Error(ErrorKind::SpecError, "squares do not fit in the grid");
  if (!(spec.shift >= 0) || 2 * spec.shift >= spec.square_gap) {
    throw Error(ErrorKind::SpecError, "squares overlap after translation");
  }
  constexpr double kIntensityA = 0.4, kIntensityB = 0.6;

  Rng rng(spec.seed);
  const double margin = 2 * spec.bubble_sigma_max;
  // Velocity of a blob whose support lies wholly inside one square, or
  // wholly in the background of both frames. Straddling blobs are redrawn.
  auto inside = [&](const Blob& b, double left, double lo_y) {
    return b.x - margin >= left && b.x + margin <= left + size - 1 && b.y - margin >= lo_y &&
           b.y + margin <= lo_y + size - 1;
  };
  auto clear_of = [&](const Blob& b, double left) {
    return b.x + margin < left - 1 || b.x - margin > left + size || b.y + margin < top - 1 ||
           b.y - margin > top + size;
  };
  auto velocity = [&](const Blob& b) -> std::optional<double> {
    if (inside(b, left_a, top)) return spec.shift;
    if (inside(b, left_b, top)) return -spec.shift;
    if (clear_of(b, left_a) && clear_of(b, left_a + spec.shift) && clear_of(b, left_b) &&
        clear_of(b, left_b - spec.shift)) {
      return 0.0;
    }
    return std::nullopt;
  };
  auto blobs = place_blobs(spec.bubble_count, 1.0, [&]() -> std::optional<Blob> {
    Blob b{rng.uniform(margin, spec.nx - 1 - margin), rng.uniform(margin, spec.ny - 1 - margin), 0.0,
           rng.uniform(spec.bubble_sigma_min, spec.bubble_sigma_max), 1.0};
    if (!velocity(b)) return std::nullopt;
    return b;
  });
  MovingSquares out{ScalarGrid(spec.nx, spec.ny), ScalarGrid(spec.nx, spec.ny), VectorGrid(spec.nx, spec.ny), {}};
  std::vector<Blob> moved = blobs;
  for (std::size_t b = 0; b < blobs.size(); ++b) {
    const double u = *velocity(blobs[b]);
    moved[b].x += u;
    const Vec3 d = perturb({u, 0.0, 0.0}, spec.noise_rel, rng, 2);
    out.samples.push_back({{blobs[b].x, blobs[b].y, 0.0}, d});
  }
  const BlobField f1(blobs, spec.nx, spec.ny), f2(moved, spec.nx, spec.ny);
  for (int j = 0; j < spec.ny; ++j) {
    const double cy = coverage(j, top, top + size);
    for (int i = 0; i < spec.nx; ++i) {
      const double a1 = coverage(i, left_a, left_a + size), b1 = coverage(i, left_b, left_b + size);
      const double a2 = coverage(i, left_a + spec.shift, left_a + size + spec.shift);
      const double b2 = coverage(i, left_b - spec.shift, left_b + size - spec.shift);
      out.i1(i, j) = cy * (kIntensityA * a1 + kIntensityB * b1) + f1(i, j);
      out.i2(i, j) = cy * (kIntensityA * a2 + kIntensityB * b2) + f2(i, j);
      if (j >= top && j < top + size) {
        if (i >= left_a && i < left_a + size) out.flow(i, j, 0) = spec.shift;
        if (i >= left_b && i < left_b + size) out.flow(i, j, 0) = -spec.shift;
      }
    }
  }
  rescale_jointly(out.i1, out.i2);
  return out;
}

elastic::LameField inclusion_lame(const PhantomSpec& spec, ScalarGrid* indicator) {
  const double cx = spec.inclusion_cx < 0 ? (spec.nx - 1) / 2.0 : spec.inclusion_cx;
  const double cy = spec.inclusion_cy < 0 ? (spec.ny - 1) / 2.0 : spec.inclusion_cy;
  const double r = spec.inclusion_radius;
  if (!(r >= 0) || cx - r <= 0 || cy - r <= 0 || cx + r >= spec.nx - 1 || cy + r >= spec.ny - 1) {
    throw Error(ErrorKind::SpecError, "inclusion must lie strictly inside the sample");
  }
  elastic::LameField p =
      elastic::uniform_lame(spec.nx - 1, spec.ny - 1, spec.lambda_background, spec.mu_background);
  ScalarGrid ind(spec.nx - 1, spec.ny - 1);
  for (int j = 0; j < spec.ny - 1; ++j) {
    for (int i = 0; i < spec.nx - 1; ++i) {
      const double dx = i + 0.5 - cx, dy = j + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) {
        p.lambda(i, j) = spec.lambda_inclusion;
        p.mu(i, j) = spec.mu_inclusion;
        ind(i, j) = 1.0;
      }
    }
  }
  elastic::validate(p);
  if (indicator) *indicator = std::move(ind);
  return p;
}

elastic::BoundaryConditions compression_bc(double compression_px) {
  elastic::BoundaryConditions bc;
  bc.dirichlet.push_back({elastic::Side::Bottom, elastic::Components::Both, 0.0, {}});
  bc.dirichlet.push_back({elastic::Side::Top, elastic::Components::Y, compression_px, {}});
  return bc;
}

ScalarGrid border_mask(int cells_x, int cells_y, int band, double spacing) {
  ScalarGrid m(cells_x, cells_y, spacing);
  for (int j = 0; j < cells_y; ++j) {
    for (int i = 0; i < cells_x; ++i) {
      if (i < band || j < band || i >= cells_x - band || j >= cells_y - band) m(i, j) = 1.0;
    }
  }
  return m;
}

InclusionPhantom make_inclusion_phantom(const PhantomSpec& spec) {
  check_common(spec);
  if (!(spec.compression_px >= 0) || spec.compression_px >= spec.ny / 2.0) {
    throw Error(ErrorKind::SpecError, "compression must lie in [0, ny / 2)");
  }
  InclusionPhantom out;
  out.lame = inclusion_lame(spec, &out.inclusion_cells);
  out.bc = compression_bc(spec.compression_px);
  out.u_true = elastic::forward_solve(out.lame, out.bc);
  out.mask = border_mask(spec.nx - 1, spec.ny - 1, spec.mask_band);

  Rng rng(spec.seed);
  // One width from the edge: bubbles near the border anchor the flow where
  // the image data runs out.
  const double margin = spec.bubble_sigma_max;
  std::vector<Blob> bubbles = place_blobs(spec.bubble_count, 2.0, [&]() -> std::optional<Blob> {
    return Blob{rng.uniform(margin, spec.nx - 1 - margin), rng.uniform(margin, spec.ny - 1 - margin), 0.0,
                rng.uniform(spec.bubble_sigma_min, spec.bubble_sigma_max), 1.0};
  });
  for (const auto& b : bubbles) {
    const Vec2 u = sample_bilinear(out.u_true, b.x, b.y);
    out.samples.push_back({{b.x, b.y, 0.0}, perturb({u[0], u[1], 0.0}, spec.noise_rel, rng, 2)});
  }
  std::vector<Blob> all = bubbles;
  for (const auto& s : background_speckle(spec, rng)) all.push_back(s);
  const BlobField f(std::move(all), spec.nx, spec.ny);

  out.i1 = ScalarGrid(spec.nx, spec.ny);
  out.i2 = ScalarGrid(spec.nx, spec.ny);
  for (int j = 0; j < spec.ny; ++j) {
    for (int i = 0; i < spec.nx; ++i) {
      out.i1(i, j) = f(i, j);
      // Material point x that lands on (i, j): x + u(x) = (i, j).
      double x = i, y = j;
      for (int it = 0; it < 50; ++it) {
        const Vec2 u = sample_bilinear(out.u_true, x, y);
        const double px = i - u[0], py = j - u[1];
        const bool done = std::abs(px - x) + std::abs(py - y) < 1e-12;
        x = px;
        y = py;
        if (done) break;
      }
      out.i2(i, j) = f(x, y);
    }
  }
  rescale_jointly(out.i1, out.i2);
  return out;
}

TrackingPhantom make_tracking_phantom(const PhantomSpec& spec) {
  check_common(spec);
  if (spec.nz < 8) throw Error(ErrorKind::SpecError, "tracking phantoms need at least 8 slices");
  const double cx = (spec.nx - 1) / 2.0, cy = (spec.ny - 1) / 2.0;
  const double radius = spec.cylinder_radius > 0 ? spec.cylinder_radius : 0.45 * std::min(spec.nx, spec.ny);
  if (radius >= std::min(cx, cy)) throw Error(ErrorKind::SpecError, "cylinder does not fit the grid");
  const double margin = 3 * spec.bubble_sigma_max;
  if (spec.nz - 1 - margin - spec.axial_shift <= margin) {
    throw Error(ErrorKind::SpecError, "volume too shallow for the axial shift");
  }

  Rng rng(spec.seed);
  auto blobs = place_blobs(spec.bubble_count, 2.0, [&]() -> std::optional<Blob> {
    const double r = rng.uniform(0.3, 0.85) * radius;
    const double theta = rng.uniform(0.0, 2 * std::numbers::pi);
    return Blob{cx + r * std::cos(theta), cy + r * std::sin(theta),
                rng.uniform(margin, spec.nz - 1 - margin - spec.axial_shift),
                rng.uniform(spec.bubble_sigma_min, spec.bubble_sigma_max), 1.0};
  });
  TrackingPhantom out;
  out.geometry = {{cx, cy}, radius};
  std::vector<Blob> moved = blobs;
  for (std::size_t b = 0; b < blobs.size(); ++b) {
    const double dx = blobs[b].x - cx, dy = blobs[b].y - cy;
    const double scale = spec.radial_bulge / radius;
    const Vec3 d{dx * scale, dy * scale, spec.axial_shift};
    moved[b].x += d[0];
    moved[b].y += d[1];
    moved[b].z += d[2];
    out.truth.push_back({{blobs[b].x, blobs[b].y, blobs[b].z}, d});
  }
  std::sort(out.truth.begin(), out.truth.end(), [](const auto& a, const auto& b) { return a.position < b.position; });

  const BlobField f1(blobs, spec.nx, spec.ny), f2(moved, spec.nx, spec.ny);
  out.v1 = Volume(spec.nx, spec.ny, spec.nz);
  out.v2 = Volume(spec.nx, spec.ny, spec.nz);
  for (int k = 0; k < spec.nz; ++k) {
    for (int j = 0; j < spec.ny; ++j) {
      for (int i = 0; i < spec.nx; ++i) {
        const double base = (i - cx) * (i - cx) + (j - cy) * (j - cy) <= radius * radius ? spec.background : 0.0;
        out.v1(i, j, k) = base + f1(i, j, k);
        out.v2(i, j, k) = base + f2(i, j, k);
      }
    }
  }
  return out;
}

}  // namespace speckleflow::phantom
