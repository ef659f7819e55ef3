#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "speckleflow/grid.hpp"
#include "speckleflow/io.hpp"
#include "speckleflow/samples.hpp"

namespace speckleflow::speckle {

/// A connected bright component. Centroid in voxel coordinates (x, y, z);
/// z = 0 for planar data.
struct Bubble {
  Vec3 centroid{};
  int voxel_volume = 0;
  int label = 0;
};

using BubbleSet = std::vector<Bubble>;

/// Sample cross-section. The axis is parallel to z through center_xy.
struct CylinderGeometry {
  Vec2 center_xy{};
  double radius = 1.0;
};

/// Thresholds for accepting a bubble pair. Angles in radians, distances in
/// voxels, volumes in voxel counts.
struct MatchCriteria {
  double epsilon_small = 20.0;
  double epsilon_large = 60.0;
  int volume_split = 300;
  double d_max = 10.0;
  double phi_max = 0.2;
  double alpha_min = 0.0;
  double alpha_max = 0.6;
  int min_voxels = 80;
};

void validate(const MatchCriteria& crit);

/// Component labels, 0 for background and 1..count otherwise, in the same
/// layout as the source volume.
struct Labeling {
  int nx = 0, ny = 0, nz = 0;
  int count = 0;
  std::vector<std::int32_t> labels;
};

/// Ones where the value is strictly above the (1 - top_fraction) quantile.
Volume binarize_quantile(const Volume& v, double top_fraction);

/// 26-connected labelling (8-connected when nz = 1). Labels are assigned in
/// order of each component's smallest linear index.
Labeling connected_components(const Volume& binary);

/// One bubble per component with at least min_voxels voxels.
BubbleSet extract_bubbles(const Labeling& labels, int min_voxels);

/// Algebraic (Kasa) least-squares circle through the given points.
CylinderGeometry fit_circle(std::span<const Vec2> points);

/// Circle fit through the boundary pixels of a binary mask. A pixel is on
/// the boundary if it is set and touches an unset 4-neighbour or the border.
CylinderGeometry fit_circle(const ScalarGrid& mask);

/// Cross-section of the sample, from the lateral (mean over z) projection
/// thresholded with Otsu's method. Planar volumes yield the full-width slab.
CylinderGeometry estimate_geometry(const Volume& v);

/// Pair geometry used by the matching rules; exposed so matches can be
/// rechecked independently.
struct PairMeasures {
  double volume_difference = 0.0;
  double epsilon = 0.0;
  double distance = 0.0;
  double axis_distance_a = 0.0;
  double axis_distance_b = 0.0;
  double axial_a = 0.0;
  double axial_b = 0.0;
  double phi = 0.0;
  double alpha = 0.0;
};

PairMeasures measure_pair(const Bubble& a, const Bubble& b, const CylinderGeometry& geom_a,
                          const CylinderGeometry& geom_b, const MatchCriteria& crit, int dims);

/// True iff all of the matching inequalities hold for the measured pair.
bool satisfies_criteria(const PairMeasures& m, const MatchCriteria& crit, int dims);

/// Greedy one-to-one matching in ascending centroid distance. dims = 3 uses
/// the cylinder rules; dims = 2 uses y as the compression axis, measures
/// axis distance laterally in x and skips the tangential-angle rule.
/// Output is sorted by position.
SampleList match_bubbles(const BubbleSet& a, const BubbleSet& b, const CylinderGeometry& geom_a,
                         const CylinderGeometry& geom_b, const MatchCriteria& crit, int dims = 3);

struct TrackingOptions {
  double top_fraction = 0.01;
  double presmooth_sigma = 0.9;
  bool log_scale = false;
  std::optional<CylinderGeometry> geometry_a;
  std::optional<CylinderGeometry> geometry_b;
};

/// Detected bubbles of one volume after normalization, smoothing and
/// thresholding. An all-constant volume has no bubbles.
BubbleSet detect_bubbles(const Volume& v, const MatchCriteria& crit, const TrackingOptions& opt);

/// Full detection and matching pipeline for a pre/post compression pair.
SampleList run_tracking(const Volume& v1, const Volume& v2, const MatchCriteria& crit,
                        const TrackingOptions& opt);
SampleList run_tracking(const Volume& v1, const Volume& v2, const MatchCriteria& crit,
                        double top_fraction, double presmooth_sigma);

struct TrackingConfig {
  MatchCriteria criteria;
  TrackingOptions options;
};

/// Keys are the MatchCriteria field names plus top_fraction,
/// presmooth_sigma and log_scale. Unknown keys are rejected.
TrackingConfig parse_tracking_config(const io::KeyValues& kv);

}  // namespace speckleflow::speckle
