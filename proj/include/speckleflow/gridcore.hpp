#pragma once

#include <vector>

#include "speckleflow/grid.hpp"

namespace speckleflow {

/// Optional base-10 log, then affine rescale onto exactly [0, 1].
Volume normalize_intensity(const Volume& v, bool log_scale);

/// Normalized Gaussian taps of length 2 * ceil(4 sigma) + 1.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian smoothing with reflect padding. The z pass is skipped
/// for single-slice volumes; sigma = 0 is the identity.
Volume gaussian_filter(const Volume& v, double sigma);
ScalarGrid gaussian_filter(const ScalarGrid& g, double sigma);

/// Smoothing width used between pyramid levels: sigma0 * sqrt(eta^-2 - 1).
double pyramid_sigma(double eta, double sigma0);

/// Extent of the next coarser level.
int coarse_extent(int n, double eta);

/// Coarse-to-fine coordinate map along one axis with pixel-centred
/// alignment: x_coarse = (x_fine + 1/2) * ratio - 1/2, ratio = n_coarse / n_fine.
double to_coarse(double x_fine, int n_fine, int n_coarse);
double to_fine(double x_coarse, int n_fine, int n_coarse);

/// Gaussian pre-filter with pyramid_sigma(eta, sigma0), then bilinear
/// resampling onto round(eta * n) points per axis.
ScalarGrid downsample(const ScalarGrid& g, double eta, double sigma0);

/// Bilinear interpolation onto an nx-by-ny grid, values multiplied by scale.
VectorGrid prolong(const VectorGrid& u, int nx, int ny, double scale);

/// Bilinear sample at fractional pixel coordinates, clamped to the grid.
double sample_bilinear(const ScalarGrid& g, double x, double y);
Vec2 sample_bilinear(const VectorGrid& u, double x, double y);

/// Central differences inside, one-sided on the border, divided by spacing.
VectorGrid spatial_gradient(const ScalarGrid& g);

/// i2 - i1.
ScalarGrid temporal_difference(const ScalarGrid& i1, const ScalarGrid& i2);

}  // namespace speckleflow
