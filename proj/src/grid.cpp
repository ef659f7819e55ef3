#include "speckleflow/grid.hpp"

#include <cmath>
#include <string>

#include "speckleflow/error.hpp"

namespace speckleflow {
namespace {

void check_extents(long nx, long ny, long nz = 1) {
  if (nx <= 0 || ny <= 0 || nz <= 0) {
    throw Error(ErrorKind::DomainError, "grid extents must be positive, got " +
                                            std::to_string(nx) + "x" + std::to_string(ny) +
                                            "x" + std::to_string(nz));
  }
}

void check_finite(std::span<const double> data) {
  for (double v : data) {
    if (!std::isfinite(v)) throw Error(ErrorKind::DomainError, "grid values must be finite");
  }
}

void check_spacing(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw Error(ErrorKind::DomainError, "grid spacing must be positive");
  }
}

}  // namespace

ScalarGrid::ScalarGrid(int nx, int ny, double spacing, double fill)
    : nx_(nx), ny_(ny), spacing_(spacing) {
  check_extents(nx, ny);
  check_spacing(spacing);
  data_.assign(static_cast<std::size_t>(nx) * ny, fill);
}

ScalarGrid::ScalarGrid(int nx, int ny, std::vector<double> data, double spacing)
    : nx_(nx), ny_(ny), spacing_(spacing), data_(std::move(data)) {
  check_extents(nx, ny);
  check_spacing(spacing);
  if (data_.size() != static_cast<std::size_t>(nx) * ny) {
    throw Error(ErrorKind::ShapeMismatch, "scalar grid data length does not match extents");
  }
  check_finite(data_);
}

VectorGrid::VectorGrid(int nx, int ny, double spacing) : nx_(nx), ny_(ny), spacing_(spacing) {
  check_extents(nx, ny);
  check_spacing(spacing);
  data_.assign(2 * static_cast<std::size_t>(nx) * ny, 0.0);
}

VectorGrid::VectorGrid(int nx, int ny, std::vector<double> data, double spacing)
    : nx_(nx), ny_(ny), spacing_(spacing), data_(std::move(data)) {
  check_extents(nx, ny);
  check_spacing(spacing);
  if (data_.size() != 2 * static_cast<std::size_t>(nx) * ny) {
    throw Error(ErrorKind::ShapeMismatch, "vector grid data length does not match extents");
  }
  check_finite(data_);
}

VectorGrid::VectorGrid(const ScalarGrid& u1, const ScalarGrid& u2)
    : VectorGrid(u1.nx(), u1.ny(), u1.spacing()) {
  if (!u1.same_shape(u2)) throw Error(ErrorKind::ShapeMismatch, "component extents differ");
  for (std::size_t p = 0; p < u1.size(); ++p) {
    data_[2 * p] = u1.values()[p];
    data_[2 * p + 1] = u2.values()[p];
  }
}

ScalarGrid VectorGrid::component(int c) const {
  ScalarGrid out(nx_, ny_, spacing_);
  auto dst = out.values();
  for (std::size_t p = 0; p < dst.size(); ++p) dst[p] = data_[2 * p + c];
  return out;
}

Volume::Volume(int nx, int ny, int nz, double fill) : nx_(nx), ny_(ny), nz_(nz) {
  check_extents(nx, ny, nz);
  data_.assign(static_cast<std::size_t>(nx) * ny * nz, fill);
}

Volume::Volume(int nx, int ny, int nz, std::vector<double> data)
    : nx_(nx), ny_(ny), nz_(nz), data_(std::move(data)) {
  check_extents(nx, ny, nz);
  if (data_.size() != static_cast<std::size_t>(nx) * ny * nz) {
    throw Error(ErrorKind::ShapeMismatch, "volume data length does not match extents");
  }
  check_finite(data_);
}

Volume::Volume(const ScalarGrid& slice)
    : Volume(slice.nx(), slice.ny(), 1,
             std::vector<double>(slice.values().begin(), slice.values().end())) {}

ScalarGrid Volume::slice(int k) const {
  std::vector<double> plane(data_.begin() + static_cast<std::ptrdiff_t>(index(0, 0, k)),
                            data_.begin() + static_cast<std::ptrdiff_t>(index(0, 0, k)) +
                                static_cast<std::ptrdiff_t>(nx_) * ny_);
  return ScalarGrid(nx_, ny_, std::move(plane));
}

}  // namespace speckleflow
