#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace speckleflow {

/// Scalar field on a regular nx-by-ny grid. Storage is row-major: the value
/// at column i, row j lives at j * nx + i. Coordinates are (x1, x2) = (i, j)
/// scaled by the spacing; rows grow downward as in image data.
class ScalarGrid {
 public:
  ScalarGrid() = default;
  ScalarGrid(int nx, int ny, double spacing = 1.0, double fill = 0.0);
  ScalarGrid(int nx, int ny, std::vector<double> data, double spacing = 1.0);

  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }
  std::size_t size() const noexcept { return data_.size(); }
  double spacing() const noexcept { return spacing_; }

  double& operator()(int i, int j) { return data_[index(i, j)]; }
  double operator()(int i, int j) const { return data_[index(i, j)]; }
  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(j) * nx_ + i;
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const ScalarGrid& other) const noexcept {
    return nx_ == other.nx_ && ny_ == other.ny_;
  }

  friend bool operator==(const ScalarGrid&, const ScalarGrid&) = default;

 private:
  int nx_ = 0;
  int ny_ = 0;
  double spacing_ = 1.0;
  std::vector<double> data_;
};

/// Two-component field, interleaved (u1, u2) per grid point.
class VectorGrid {
 public:
  VectorGrid() = default;
  VectorGrid(int nx, int ny, double spacing = 1.0);
  VectorGrid(int nx, int ny, std::vector<double> data, double spacing = 1.0);
  VectorGrid(const ScalarGrid& u1, const ScalarGrid& u2);

  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }
  std::size_t points() const noexcept { return static_cast<std::size_t>(nx_) * ny_; }
  double spacing() const noexcept { return spacing_; }

  double& operator()(int i, int j, int c) { return data_[2 * point(i, j) + c]; }
  double operator()(int i, int j, int c) const { return data_[2 * point(i, j) + c]; }
  std::size_t point(int i, int j) const noexcept {
    return static_cast<std::size_t>(j) * nx_ + i;
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  ScalarGrid component(int c) const;

  bool same_shape(const VectorGrid& other) const noexcept {
    return nx_ == other.nx_ && ny_ == other.ny_;
  }
  bool same_shape(const ScalarGrid& other) const noexcept {
    return nx_ == other.nx() && ny_ == other.ny();
  }

  friend bool operator==(const VectorGrid&, const VectorGrid&) = default;

 private:
  int nx_ = 0;
  int ny_ = 0;
  double spacing_ = 1.0;
  std::vector<double> data_;
};

/// Volumetric scan, row-major with z outermost: (k * ny + j) * nx + i.
class Volume {
 public:
  Volume() = default;
  Volume(int nx, int ny, int nz, double fill = 0.0);
  Volume(int nx, int ny, int nz, std::vector<double> data);
  explicit Volume(const ScalarGrid& slice);

  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }
  int nz() const noexcept { return nz_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
  double operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }
  std::size_t index(int i, int j, int k) const noexcept {
    return (static_cast<std::size_t>(k) * ny_ + j) * nx_ + i;
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const Volume& other) const noexcept {
    return nx_ == other.nx_ && ny_ == other.ny_ && nz_ == other.nz_;
  }

  /// The z = k plane as a ScalarGrid.
  ScalarGrid slice(int k) const;

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  int nx_ = 0;
  int ny_ = 0;
  int nz_ = 0;
  std::vector<double> data_;
};

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;

}  // namespace speckleflow
