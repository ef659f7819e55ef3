#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "speckleflow/elastic.hpp"
#include "speckleflow/grid.hpp"
#include "speckleflow/io.hpp"
#include "speckleflow/samples.hpp"
#include "speckleflow/speckle.hpp"

namespace speckleflow::phantom {

/// Portable random stream: std::mt19937_64 (its output sequence is fixed by
/// the standard) with hand-rolled conversions, since the standard
/// distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal by Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
};

enum class Kind { MovingSquares, Inclusion, Tracking };

Kind parse_kind(const std::string& name);

struct PhantomSpec {
  Kind kind = Kind::MovingSquares;
  int nx = 128;
  int ny = 128;
  int nz = 1;
  int bubble_count = 50;
  double bubble_sigma_min = 1.5;
  double bubble_sigma_max = 3.0;
  std::uint64_t seed = 1;
  /// Relative perturbation of each sample displacement, uniform in a disk.
  double noise_rel = 0.0;
  /// Faint background speckle that gives the flow data term texture.
  int speckle_count = 0;
  double speckle_amplitude = 0.3;

  // Moving squares.
  int square_size = 48;
  int square_gap = 16;
  double shift = 4.0;

  // Inclusion.
  double compression_px = 20.0;
  double lambda_background = 490.0;
  double mu_background = 10.0;
  double lambda_inclusion = 490.0;
  double mu_inclusion = 30.0;
  /// Negative means the grid centre.
  double inclusion_cx = -1.0;
  double inclusion_cy = -1.0;
  double inclusion_radius = 30.0;
  /// Width in cells of the known-parameter band along the border.
  int mask_band = 8;

  // Tracking (volumetric cylinder).
  double cylinder_radius = 0.0;
  double background = 0.2;
  double axial_shift = 3.0;
  double radial_bulge = 1.5;
};

/// Plain "key = value" form; keys mirror the field names, kind is one of
/// moving_squares | inclusion | tracking.
PhantomSpec parse_phantom_spec(const io::KeyValues& kv);

struct MovingSquares {
  ScalarGrid i1;
  ScalarGrid i2;
  VectorGrid flow;
  SampleList samples;
};

MovingSquares make_moving_squares(const PhantomSpec& spec);

struct InclusionPhantom {
  elastic::LameField lame;
  elastic::BoundaryConditions bc;
  VectorGrid u_true;
  ScalarGrid i1;
  ScalarGrid i2;
  SampleList samples;
  /// Cells of the inclusion (1) and of the known border band (1).
  ScalarGrid inclusion_cells;
  ScalarGrid mask;
};

InclusionPhantom make_inclusion_phantom(const PhantomSpec& spec);

/// Lamé parameters of a disk inclusion on (nx-1)-by-(ny-1) cells, and the
/// matching cell indicator.
elastic::LameField inclusion_lame(const PhantomSpec& spec, ScalarGrid* indicator = nullptr);

/// Bottom fixed, top pushed down by compression_px, sides free.
elastic::BoundaryConditions compression_bc(double compression_px);

/// 1 on cells within band of the border, 0 elsewhere.
ScalarGrid border_mask(int cells_x, int cells_y, int band, double spacing = 1.0);

struct TrackingPhantom {
  Volume v1;
  Volume v2;
  /// Planted bubble centres and their displacements.
  SampleList truth;
  speckle::CylinderGeometry geometry;
};

/// Cylinder about the z axis with planted blobs that move axially by
/// axial_shift and bulge outward by radial_bulge * r / R.
TrackingPhantom make_tracking_phantom(const PhantomSpec& spec);

}  // namespace speckleflow::phantom
