#include "speckleflow/gridcore.hpp"

#include <algorithm>
#include <cmath>

#include "speckleflow/error.hpp"
#include "speckleflow/kernels.hpp"
#include "speckleflow/parallel.hpp"

namespace speckleflow {
namespace {

// Half-sample symmetric reflection: -1 -> 0, n -> n - 1.
std::ptrdiff_t reflect(std::ptrdiff_t idx, std::ptrdiff_t n) {
  const std::ptrdiff_t period = 2 * n;
  idx %= period;
  if (idx < 0) idx += period;
  return idx < n ? idx : period - 1 - idx;
}

// Filters every line of length n whose elements are stride apart; line l
// starts at offset(l).
template <typename Offset>
void filter_lines(std::span<double> data, std::size_t lines, std::ptrdiff_t n,
                  std::ptrdiff_t stride, Offset offset, const std::vector<double>& taps) {
  const auto& k = kernels::active();
  const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(taps.size() / 2);
  parallel_for(lines, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> padded(static_cast<std::size_t>(n + 2 * radius));
    std::vector<double> out(static_cast<std::size_t>(n));
    for (std::size_t l = lo; l < hi; ++l) {
      double* base = data.data() + offset(l);
      for (std::ptrdiff_t t = 0; t < n + 2 * radius; ++t) {
        padded[t] = base[reflect(t - radius, n) * stride];
      }
      k.correlate(padded.data(), taps.data(), taps.size(), out.data(), out.size());
      for (std::ptrdiff_t t = 0; t < n; ++t) base[t * stride] = out[t];
    }
  });
}

void check_eta(double eta) {
  if (!(eta > 0.0 && eta < 1.0)) {
    throw Error(ErrorKind::DomainError, "downsampling factor eta must lie in (0, 1)");
  }
}

}  // namespace

Volume normalize_intensity(const Volume& v, bool log_scale) {
  Volume out = v;
  auto values = out.values();
  if (log_scale) {
    for (double& x : values) {
      if (!(x > 0.0)) {
        throw Error(ErrorKind::DomainError, "log scaling requires strictly positive intensities");
      }
      x = std::log10(x);
    }
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double vmin = *lo;
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw Error(ErrorKind::ConstantField, "cannot rescale a constant volume");
  for (double& x : values) x = (x - vmin) / range;
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorKind::DomainError, "Gaussian sigma must be nonnegative");
  }
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
    sum += taps[k + radius];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

Volume gaussian_filter(const Volume& v, double sigma) {
  const auto taps = gaussian_kernel(sigma);
  if (taps.size() == 1) return v;
  Volume out = v;
  const std::ptrdiff_t nx = v.nx(), ny = v.ny(), nz = v.nz();
  auto data = out.values();
  filter_lines(data, static_cast<std::size_t>(ny * nz), nx, 1,
               [&](std::size_t l) { return static_cast<std::ptrdiff_t>(l) * nx; }, taps);
  filter_lines(data, static_cast<std::size_t>(nx * nz), ny, nx,
               [&](std::size_t l) {
                 const auto k = static_cast<std::ptrdiff_t>(l) / nx;
                 const auto i = static_cast<std::ptrdiff_t>(l) % nx;
                 return k * nx * ny + i;
               },
               taps);
  if (nz > 1) {
    filter_lines(data, static_cast<std::size_t>(nx * ny), nz, nx * ny,
                 [](std::size_t l) { return static_cast<std::ptrdiff_t>(l); }, taps);
  }
  return out;
}

ScalarGrid gaussian_filter(const ScalarGrid& g, double sigma) {
  Volume smoothed = gaussian_filter(Volume(g), sigma);
  return ScalarGrid(g.nx(), g.ny(),
                    std::vector<double>(smoothed.values().begin(), smoothed.values().end()),
                    g.spacing());
}

double pyramid_sigma(double eta, double sigma0) {
  check_eta(eta);
  if (!(sigma0 > 0.0)) throw Error(ErrorKind::DomainError, "sigma0 must be positive");
  return sigma0 * std::sqrt(1.0 / (eta * eta) - 1.0);
}

int coarse_extent(int n, double eta) { return static_cast<int>(std::lround(eta * n)); }

double to_coarse(double x_fine, int n_fine, int n_coarse) {
  return (x_fine + 0.5) * (static_cast<double>(n_coarse) / n_fine) - 0.5;
}

double to_fine(double x_coarse, int n_fine, int n_coarse) {
  return (x_coarse + 0.5) * (static_cast<double>(n_fine) / n_coarse) - 0.5;
}

double sample_bilinear(const ScalarGrid& g, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(g.nx() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(g.ny() - 1));
  const int i0 = std::min(static_cast<int>(x), std::max(g.nx() - 2, 0));
  const int j0 = std::min(static_cast<int>(y), std::max(g.ny() - 2, 0));
  const int i1 = std::min(i0 + 1, g.nx() - 1);
  const int j1 = std::min(j0 + 1, g.ny() - 1);
  const double fx = x - i0;
  const double fy = y - j0;
  return (1 - fy) * ((1 - fx) * g(i0, j0) + fx * g(i1, j0)) +
         fy * ((1 - fx) * g(i0, j1) + fx * g(i1, j1));
}

Vec2 sample_bilinear(const VectorGrid& u, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(u.nx() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(u.ny() - 1));
  const int i0 = std::min(static_cast<int>(x), std::max(u.nx() - 2, 0));
  const int j0 = std::min(static_cast<int>(y), std::max(u.ny() - 2, 0));
  const int i1 = std::min(i0 + 1, u.nx() - 1);
  const int j1 = std::min(j0 + 1, u.ny() - 1);
  const double fx = x - i0;
  const double fy = y - j0;
  Vec2 r{};
  for (int c = 0; c < 2; ++c) {
    r[c] = (1 - fy) * ((1 - fx) * u(i0, j0, c) + fx * u(i1, j0, c)) +
           fy * ((1 - fx) * u(i0, j1, c) + fx * u(i1, j1, c));
  }
  return r;
}

ScalarGrid downsample(const ScalarGrid& g, double eta, double sigma0) {
  const double sigma = pyramid_sigma(eta, sigma0);
  const int cx = coarse_extent(g.nx(), eta);
  const int cy = coarse_extent(g.ny(), eta);
  if (cx < 2 || cy < 2) {
    throw Error(ErrorKind::GridTooSmall, "downsampled grid would be smaller than 2x2");
  }
  const ScalarGrid smooth = gaussian_filter(g, sigma);
  ScalarGrid out(cx, cy, g.spacing());
  for (int j = 0; j < cy; ++j) {
    const double y = to_fine(j, g.ny(), cy);
    for (int i = 0; i < cx; ++i) out(i, j) = sample_bilinear(smooth, to_fine(i, g.nx(), cx), y);
  }
  return out;
}

VectorGrid prolong(const VectorGrid& u, int nx, int ny, double scale) {
  if (nx < u.nx() || ny < u.ny()) {
    throw Error(ErrorKind::DomainError, "prolongation target is smaller than the source");
  }
  VectorGrid out(nx, ny, u.spacing());
  for (int j = 0; j < ny; ++j) {
    const double y = to_coarse(j, ny, u.ny());
    for (int i = 0; i < nx; ++i) {
      const Vec2 v = sample_bilinear(u, to_coarse(i, nx, u.nx()), y);
      out(i, j, 0) = scale * v[0];
      out(i, j, 1) = scale * v[1];
    }
  }
  return out;
}

VectorGrid spatial_gradient(const ScalarGrid& g) {
  VectorGrid grad(g.nx(), g.ny(), g.spacing());
  const double h = g.spacing();
  const int nx = g.nx(), ny = g.ny();
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double dx = 0.0, dy = 0.0;
      if (nx > 1) {
        if (i == 0) dx = g(1, j) - g(0, j);
        else if (i == nx - 1) dx = g(nx - 1, j) - g(nx - 2, j);
        else dx = 0.5 * (g(i + 1, j) - g(i - 1, j));
      }
      if (ny > 1) {
        if (j == 0) dy = g(i, 1) - g(i, 0);
        else if (j == ny - 1) dy = g(i, ny - 1) - g(i, ny - 2);
        else dy = 0.5 * (g(i, j + 1) - g(i, j - 1));
      }
      grad(i, j, 0) = dx / h;
      grad(i, j, 1) = dy / h;
    }
  }
  return grad;
}

ScalarGrid temporal_difference(const ScalarGrid& i1, const ScalarGrid& i2) {
  if (!i1.same_shape(i2)) throw Error(ErrorKind::ShapeMismatch, "image extents differ");
  ScalarGrid out(i1.nx(), i1.ny(), i1.spacing());
  for (std::size_t p = 0; p < out.size(); ++p) out.values()[p] = i2.values()[p] - i1.values()[p];
  return out;
}

}  // namespace speckleflow
