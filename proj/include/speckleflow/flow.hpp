#pragma once

#include <Eigen/SparseCore>
#include <string>
#include <vector>

#include "speckleflow/grid.hpp"
#include "speckleflow/io.hpp"
#include "speckleflow/samples.hpp"

namespace speckleflow::flow {

enum class Solver { Direct, ConjugateGradient, GradientDescent };

Solver parse_solver(const std::string& name);
std::string to_string(Solver solver);

/// Weights and numerics of the bubble-augmented optical flow functional
///   F(u) = sum (grad I . u + I_t)^2 + alpha |grad u|^2
///          + beta sum_i g_i |u - u_i|^2 + gamma (div u)^2.
struct FlowParams {
  double alpha = 0.8;
  double beta = 4.0;
  double gamma = 0.0;
  double sigma_g = 5.0;
  int levels = 1;
  double eta = 0.5;
  double sigma0 = 0.6;
  Solver solver = Solver::Direct;
  double tol = 1e-8;
  /// 0 selects 10 * unknowns.
  int max_iter = 0;
};

/// Smallest sigma_g for which every Gaussian weight is at most 1.
inline constexpr double kMinSigmaG = 0.3989422804014327;

void validate(const FlowParams& p);

/// Reads the "key = value" form; keys alpha, beta, gamma, sigma_g, levels,
/// eta, sigma0, solver, tol, max_iter. Unknown keys are rejected.
FlowParams parse_flow_params(const io::KeyValues& kv);

/// Discrete form of F(u) = 1/2 u^T A u - b^T u + c over the interleaved
/// unknowns (u1, u2) of every pixel.
struct FlowSystem {
  int nx = 0;
  int ny = 0;
  double spacing = 1.0;
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd rhs;
  double constant = 0.0;
};

/// Isotropic 2-D Gaussian density with standard deviation sigma.
double gaussian_weight(Vec2 x, Vec2 xhat, double sigma);

/// Sum over samples of the Gaussian weight at each pixel (midpoint rule).
ScalarGrid bubble_weight_sum(int nx, int ny, double spacing, const SampleList& samples,
                             double sigma);

/// F(u) evaluated term by term, without forming the matrix.
double evaluate_functional(const VectorGrid& u, const VectorGrid& grad_i, const ScalarGrid& i_t,
                           const SampleList& samples, const FlowParams& p);

FlowSystem assemble(const VectorGrid& grad_i, const ScalarGrid& i_t, const SampleList& samples,
                    const FlowParams& p);

/// A u - b, the Euclidean gradient of the discrete functional.
VectorGrid gradient(const FlowSystem& sys, const VectorGrid& u);
VectorGrid gradient(const VectorGrid& u, const VectorGrid& grad_i, const ScalarGrid& i_t,
                    const SampleList& samples, const FlowParams& p);

/// Solves A u = b with the solver named in p.
VectorGrid solve_flow(const FlowSystem& sys, const FlowParams& p);

/// Jacobi-preconditioned conjugate gradients on A x = rhs.
Eigen::VectorXd conjugate_gradient(const Eigen::SparseMatrix<double>& a,
                                   const Eigen::VectorXd& rhs, double tol, int max_iter);

struct DescentResult {
  VectorGrid u;
  std::vector<double> objective;
  int iterations = 0;
};

/// Steepest descent with exact line search, omega = |r|^2 / (r^T A r).
DescentResult gradient_descent(const FlowSystem& sys, const VectorGrid& init,
                               const FlowParams& p);
DescentResult gradient_descent_flow(const VectorGrid& init, const VectorGrid& grad_i,
                                    const ScalarGrid& i_t, const SampleList& samples,
                                    const FlowParams& p);

/// Samples of a finer level expressed on the next coarser one.
SampleList coarsen_samples(const SampleList& samples, int nx_fine, int ny_fine, int nx_coarse,
                           int ny_coarse);

/// I(x + u(x)) by bilinear sampling, clamped at the border.
ScalarGrid warp(const ScalarGrid& image, const VectorGrid& u);

/// Coarse-to-fine estimation. Each level linearises around the prolonged
/// coarser estimate (second image warped by it) and solves for a correction.
/// levels = 1 is the single-scale solve.
VectorGrid multiscale_flow(const ScalarGrid& i1, const ScalarGrid& i2, const SampleList& samples,
                           const FlowParams& p);

}  // namespace speckleflow::flow
