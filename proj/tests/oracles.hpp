#pragma once

// Independent reference computations shared by the unit and acceptance
// binaries. Nothing here calls the routine it is used to check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "speckleflow/elastic.hpp"
#include "speckleflow/flow.hpp"
#include "speckleflow/invert.hpp"

namespace oracle {

using namespace speckleflow;

struct FlowInstance {
  VectorGrid grad;
  ScalarGrid i_t;
  SampleList samples;
};

/// Random image gradients, temporal differences and samples. With
/// independent = false both gradient components are the same grid vector.
inline FlowInstance random_flow_instance(int nx, int ny, std::mt19937_64& rng, bool independent = true,
                                         int sample_count = 3, double spacing = 1.0) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  FlowInstance f{VectorGrid(nx, ny, spacing), ScalarGrid(nx, ny, spacing), {}};
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      f.grad(i, j, 0) = d(rng);
      f.grad(i, j, 1) = independent ? d(rng) : f.grad(i, j, 0);
      f.i_t(i, j) = d(rng);
    }
  }
  std::uniform_real_distribution<double> px(0.0, nx - 1.0), py(0.0, ny - 1.0);
  for (int s = 0; s < sample_count; ++s) f.samples.push_back({{px(rng), py(rng), 0}, {d(rng), d(rng), 0}});
  return f;
}

inline VectorGrid random_field(int nx, int ny, std::mt19937_64& rng, double scale = 1.0, double spacing = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  VectorGrid u(nx, ny, spacing);
  for (double& v : u.values()) v = d(rng);
  return u;
}

/// Horn-Schunck by pointwise block Gauss-Seidel on the Euler-Lagrange
/// equations  h^2 (grad I . u + I_t) grad I + alpha sum_nb (u - u_nb) = 0.
inline VectorGrid horn_schunck(const VectorGrid& grad, const ScalarGrid& i_t, double alpha,
                               double tol = 1e-15, int max_sweeps = 200000) {
  const int nx = grad.nx(), ny = grad.ny();
  const double a2 = i_t.spacing() * i_t.spacing();
  VectorGrid u(nx, ny, i_t.spacing());
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        double s1 = 0.0, s2 = 0.0;
        int n = 0;
        const int di[4] = {-1, 1, 0, 0}, dj[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int ii = i + di[k], jj = j + dj[k];
          if (ii < 0 || jj < 0 || ii >= nx || jj >= ny) continue;
          s1 += u(ii, jj, 0);
          s2 += u(ii, jj, 1);
          ++n;
        }
        const double g1 = grad(i, j, 0), g2 = grad(i, j, 1), it = i_t(i, j);
        const double m11 = a2 * g1 * g1 + alpha * n, m22 = a2 * g2 * g2 + alpha * n, m12 = a2 * g1 * g2;
        const double r1 = alpha * s1 - a2 * g1 * it, r2 = alpha * s2 - a2 * g2 * it;
        const double det = m11 * m22 - m12 * m12;
        const double v1 = (m22 * r1 - m12 * r2) / det, v2 = (m11 * r2 - m12 * r1) / det;
        change = std::max({change, std::abs(v1 - u(i, j, 0)), std::abs(v2 - u(i, j, 1))});
        u(i, j, 0) = v1;
        u(i, j, 1) = v2;
      }
    }
    if (change < tol) break;
  }
  return u;
}

inline double min_eigenvalue(const Eigen::SparseMatrix<double>& a) {
  const Eigen::MatrixXd dense = Eigen::MatrixXd(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double symmetry_defect(const Eigen::SparseMatrix<double>& a) {
  const Eigen::MatrixXd dense = Eigen::MatrixXd(a);
  const double scale = std::max(dense.cwiseAbs().maxCoeff(), 1e-300);
  return (dense - dense.transpose()).cwiseAbs().maxCoeff() / scale;
}

inline double max_abs_diff(const VectorGrid& a, const VectorGrid& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
  return m;
}

/// Worst relative mismatch of central-difference directional derivatives of
/// evaluate_functional against <gradient, h>.
inline double gradient_check(const FlowInstance& f, const flow::FlowParams& p, std::mt19937_64& rng,
                             double step = 1e-6) {
  const VectorGrid u = random_field(f.grad.nx(), f.grad.ny(), rng, 1.0, f.grad.spacing());
  const VectorGrid h = random_field(f.grad.nx(), f.grad.ny(), rng, 1.0, f.grad.spacing());
  VectorGrid up = u, um = u;
  for (std::size_t k = 0; k < u.values().size(); ++k) {
    up.values()[k] += step * h.values()[k];
    um.values()[k] -= step * h.values()[k];
  }
  const double fd = (flow::evaluate_functional(up, f.grad, f.i_t, f.samples, p) -
                     flow::evaluate_functional(um, f.grad, f.i_t, f.samples, p)) /
                    (2 * step);
  const VectorGrid g = flow::gradient(u, f.grad, f.i_t, f.samples, p);
  double ip = 0.0;
  for (std::size_t k = 0; k < g.values().size(); ++k) ip += g.values()[k] * h.values()[k];
  return std::abs(fd - ip) / std::max(std::abs(ip), 1e-12);
}

/// Random constant Lamé pair and affine displacement; returns the worst
/// nodal error of the forward solve against the affine field when it is
/// imposed on the whole boundary.
inline double patch_test(int nx, int ny, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-0.2, 0.2), lam(0.0, 500.0), mu(0.5, 50.0);
  const double a0 = coef(rng), a1 = coef(rng), a2 = coef(rng), b0 = coef(rng), b1 = coef(rng), b2 = coef(rng);
  auto exact = [&](double x, double y) { return Vec2{a0 + a1 * x + a2 * y, b0 + b1 * x + b2 * y}; };
  const elastic::LameField p = elastic::uniform_lame(nx - 1, ny - 1, lam(rng), mu(rng));
  elastic::BoundaryConditions bc;
  for (auto side : {elastic::Side::Top, elastic::Side::Bottom}) {
    elastic::DirichletSegment seg{side, elastic::Components::Both, 0.0, {}};
    const int j = side == elastic::Side::Top ? 0 : ny - 1;
    for (int i = 0; i < nx; ++i) seg.profile.push_back(exact(i, j));
    bc.dirichlet.push_back(seg);
  }
  for (auto side : {elastic::Side::Left, elastic::Side::Right}) {
    elastic::DirichletSegment seg{side, elastic::Components::Both, 0.0, {}};
    const int i = side == elastic::Side::Left ? 0 : nx - 1;
    for (int j = 0; j < ny; ++j) seg.profile.push_back(exact(i, j));
    bc.dirichlet.push_back(seg);
  }
  const VectorGrid u = elastic::forward_solve(p, bc);
  double worst = 0.0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Vec2 e = exact(i, j);
      worst = std::max({worst, std::abs(u(i, j, 0) - e[0]), std::abs(u(i, j, 1) - e[1])});
    }
  }
  return worst;
}

/// Smooth random Lamé field with mu comfortably above zero.
inline elastic::LameField random_lame(int cells_x, int cells_y, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  const double lb = 50 + 200 * d(rng), mb = 5 + 10 * d(rng);
  const double kx = 1 + 3 * d(rng), ky = 1 + 3 * d(rng), ph = 6.28 * d(rng);
  elastic::LameField p = elastic::uniform_lame(cells_x, cells_y, lb, mb);
  for (int j = 0; j < cells_y; ++j) {
    for (int i = 0; i < cells_x; ++i) {
      const double w = std::sin(kx * i / cells_x + ph) * std::cos(ky * j / cells_y);
      p.lambda(i, j) = lb * (1 + 0.3 * w);
      p.mu(i, j) = mb * (1 + 0.4 * w);
    }
  }
  return p;
}

inline elastic::LameField random_direction(int cells_x, int cells_y, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  elastic::LameField h = elastic::uniform_lame(cells_x, cells_y, 0, 0);
  for (double& v : h.lambda.values()) v = d(rng);
  for (double& v : h.mu.values()) v = d(rng);
  return h;
}

inline elastic::BoundaryConditions compression(double amount) {
  elastic::BoundaryConditions bc;
  bc.dirichlet.push_back({elastic::Side::Bottom, elastic::Components::Both, 0.0, {}});
  bc.dirichlet.push_back({elastic::Side::Top, elastic::Components::Y, amount, {}});
  return bc;
}

/// Relative mismatch of <F'h, w> against <h, F'* w>, normalised by
/// |F'h| |w|.
inline double adjoint_defect(int n, std::mt19937_64& rng) {
  const auto p = random_lame(n - 1, n - 1, rng);
  const auto bc = compression(1.5);
  const elastic::ForwardModel model(p, bc);
  const VectorGrid u = model.solve();
  const auto h = random_direction(n - 1, n - 1, rng);
  VectorGrid w = random_field(n, n, rng);
  const VectorGrid fh = model.derivative(u, h);
  const elastic::LameField aw = model.adjoint(u, w);
  const double lhs = elastic::inner_product(fh, w);
  const double rhs = elastic::inner_product(h, aw);
  return std::abs(lhs - rhs) / (elastic::norm(fh) * elastic::norm(w));
}

/// Plain projected Landweber with the steepest-descent step, written
/// directly against the forward model. Returns the residual per iterate.
inline std::vector<double> plain_landweber(const invert::InversionConfig& cfg, const VectorGrid& data,
                                           const elastic::BoundaryConditions& bc) {
  std::vector<double> residuals;
  elastic::LameField x = cfg.initial;
  for (int k = 0; k <= cfg.max_iter; ++k) {
    const elastic::ForwardModel model(x, bc);
    const VectorGrid u = model.solve();
    VectorGrid r = u;
    for (std::size_t q = 0; q < r.values().size(); ++q) r.values()[q] -= data.values()[q];
    residuals.push_back(elastic::norm(r));
    if (k == cfg.max_iter) break;
    elastic::LameField s = model.adjoint(u, r);
    if (cfg.boundary_mask) {
      for (std::size_t q = 0; q < s.lambda.size(); ++q) {
        if (cfg.boundary_mask->values()[q] != 0.0) s.lambda.values()[q] = s.mu.values()[q] = 0.0;
      }
    }
    const double s2 = elastic::inner_product(s, s);
    if (s2 == 0.0) continue;
    const double d = elastic::norm(model.derivative(u, s));
    const double omega = s2 / (d * d);
    for (std::size_t q = 0; q < s.lambda.size(); ++q) {
      x.lambda.values()[q] = std::max(0.0, x.lambda.values()[q] - omega * s.lambda.values()[q]);
      x.mu.values()[q] = std::max(cfg.mu_floor, x.mu.values()[q] - omega * s.mu.values()[q]);
    }
  }
  return residuals;
}

/// Mean of a cell field over the disk of the given radius about (cx, cy),
/// tested at cell centres.
inline double disk_mean(const ScalarGrid& g, double cx, double cy, double radius) {
  double s = 0.0;
  int n = 0;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      if (std::hypot(i + 0.5 - cx, j + 0.5 - cy) <= radius) {
        s += g(i, j);
        ++n;
      }
    }
  }
  return n ? s / n : 0.0;
}

}  // namespace oracle
