#include "speckleflow/flow.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "speckleflow/error.hpp"
#include "speckleflow/gridcore.hpp"
#include "speckleflow/kernels.hpp"

namespace speckleflow::flow {
namespace {

using Triplet = Eigen::Triplet<double>;

void check_shapes(const VectorGrid& grad_i, const ScalarGrid& i_t) {
  if (!grad_i.same_shape(i_t)) {
    throw Error(ErrorKind::ShapeMismatch, "image gradient and temporal difference extents differ");
  }
}

Eigen::Map<const Eigen::VectorXd> as_vector(const VectorGrid& u) {
  return {u.values().data(), static_cast<Eigen::Index>(u.values().size())};
}

VectorGrid to_grid(const Eigen::VectorXd& x, int nx, int ny, double spacing) {
  return VectorGrid(nx, ny, std::vector<double>(x.data(), x.data() + x.size()), spacing);
}

int iteration_cap(const FlowParams& p, Eigen::Index unknowns) {
  return p.max_iter > 0 ? p.max_iter : static_cast<int>(10 * unknowns);
}

// Cell divergence coefficients for the bilinear element: d = sum(coef * u).
struct CellDivergence {
  std::array<Eigen::Index, 8> dof;
  std::array<double, 8> coef;
};

CellDivergence cell_divergence(int i, int j, int nx, double h) {
  auto p = [nx](int a, int b) { return static_cast<Eigen::Index>(b) * nx + a; };
  const double s = 0.5 / h;
  return {{2 * p(i, j), 2 * p(i + 1, j), 2 * p(i, j + 1), 2 * p(i + 1, j + 1),
           2 * p(i, j) + 1, 2 * p(i + 1, j) + 1, 2 * p(i, j + 1) + 1, 2 * p(i + 1, j + 1) + 1},
          {-s, s, -s, s, -s, -s, s, s}};
}

}  // namespace

Solver parse_solver(const std::string& name) {
  if (name == "direct") return Solver::Direct;
  if (name == "cg") return Solver::ConjugateGradient;
  if (name == "gradient_descent") return Solver::GradientDescent;
  throw Error(ErrorKind::FormatError, "unknown solver '" + name + "'");
}

std::string to_string(Solver solver) {
  switch (solver) {
    case Solver::Direct: return "direct";
    case Solver::ConjugateGradient: return "cg";
    case Solver::GradientDescent: return "gradient_descent";
  }
  return "direct";
}

void validate(const FlowParams& p) {
  if (p.alpha < 0 || p.beta < 0 || p.gamma < 0) {
    throw Error(ErrorKind::DomainError, "alpha, beta and gamma must be nonnegative");
  }
  if (!(p.alpha + p.beta > 0)) {
    throw Error(ErrorKind::DomainError, "alpha + beta must be positive for a unique minimiser");
  }
  if (!(p.sigma_g >= kMinSigmaG)) {
    throw Error(ErrorKind::DomainError, "sigma_g must be at least 1/sqrt(2 pi)");
  }
  if (p.levels < 1) throw Error(ErrorKind::DomainError, "levels must be at least 1");
  if (!(p.eta > 0 && p.eta < 1)) throw Error(ErrorKind::DomainError, "eta must lie in (0, 1)");
  if (!(p.sigma0 > 0)) throw Error(ErrorKind::DomainError, "sigma0 must be positive");
  if (!(p.tol > 0)) throw Error(ErrorKind::DomainError, "tol must be positive");
  if (p.max_iter < 0) throw Error(ErrorKind::DomainError, "max_iter must be nonnegative");
}

FlowParams parse_flow_params(const io::KeyValues& kv) {
  io::ConfigReader r(kv);
  FlowParams p;
  p.alpha = r.get_double("alpha", p.alpha);
  p.beta = r.get_double("beta", p.beta);
  p.gamma = r.get_double("gamma", p.gamma);
  p.sigma_g = r.get_double("sigma_g", p.sigma_g);
  p.levels = r.get_int("levels", p.levels);
  p.eta = r.get_double("eta", p.eta);
  p.sigma0 = r.get_double("sigma0", p.sigma0);
  p.solver = parse_solver(r.get_string("solver", to_string(p.solver)));
  p.tol = r.get_double("tol", p.tol);
  p.max_iter = r.get_int("max_iter", p.max_iter);
  r.reject_unknown();
  validate(p);
  return p;
}

double gaussian_weight(Vec2 x, Vec2 xhat, double sigma) {
  if (!(sigma > 0)) throw Error(ErrorKind::DomainError, "Gaussian sigma must be positive");
  const double dx = x[0] - xhat[0], dy = x[1] - xhat[1];
  return std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) /
         (2 * std::numbers::pi * sigma * sigma);
}

ScalarGrid bubble_weight_sum(int nx, int ny, double spacing, const SampleList& samples,
                             double sigma) {
  ScalarGrid w(nx, ny, spacing);
  for (const auto& s : samples) {
    const Vec2 xhat{s.position[0] * spacing, s.position[1] * spacing};
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) w(i, j) += gaussian_weight({i * spacing, j * spacing}, xhat, sigma);
    }
  }
  return w;
}

double evaluate_functional(const VectorGrid& u, const VectorGrid& grad_i, const ScalarGrid& i_t,
                           const SampleList& samples, const FlowParams& p) {
  check_shapes(grad_i, i_t);
  if (!u.same_shape(grad_i)) throw Error(ErrorKind::ShapeMismatch, "flow field extents differ");
  const int nx = u.nx(), ny = u.ny();
  const double h = i_t.spacing();
  const double area = h * h;
  double data = 0.0, smooth = 0.0, bubble = 0.0, divergence = 0.0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double r = grad_i(i, j, 0) * u(i, j, 0) + grad_i(i, j, 1) * u(i, j, 1) + i_t(i, j);
      data += area * r * r;
      for (int c = 0; c < 2; ++c) {
        if (i + 1 < nx) smooth += std::pow(u(i + 1, j, c) - u(i, j, c), 2);
        if (j + 1 < ny) smooth += std::pow(u(i, j + 1, c) - u(i, j, c), 2);
      }
    }
  }
  if (p.beta > 0) {
    for (const auto& s : samples) {
      const Vec2 xhat{s.position[0] * h, s.position[1] * h};
      for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
          const double g = gaussian_weight({i * h, j * h}, xhat, p.sigma_g);
          const double e1 = u(i, j, 0) - s.displacement[0], e2 = u(i, j, 1) - s.displacement[1];
          bubble += area * g * (e1 * e1 + e2 * e2);
        }
      }
    }
  }
  if (p.gamma > 0) {
    const auto values = u.values();
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        const CellDivergence cd = cell_divergence(i, j, nx, h);
        double d = 0.0;
        for (int k = 0; k < 8; ++k) d += cd.coef[k] * values[cd.dof[k]];
        divergence += area * d * d;
      }
    }
  }
  return data + p.alpha * smooth + p.beta * bubble + p.gamma * divergence;
}

FlowSystem assemble(const VectorGrid& grad_i, const ScalarGrid& i_t, const SampleList& samples,
                    const FlowParams& p) {
  check_shapes(grad_i, i_t);
  if (!(p.alpha + p.beta > 0)) {
    throw Error(ErrorKind::DomainError, "alpha = beta = 0 leaves the flow undetermined");
  }
  const int nx = grad_i.nx(), ny = grad_i.ny();
  const double h = i_t.spacing();
  const double area = h * h;
  const Eigen::Index n = 2 * static_cast<Eigen::Index>(nx) * ny;
  FlowSystem sys{nx, ny, h, Eigen::SparseMatrix<double>(n, n), Eigen::VectorXd::Zero(n), 0.0};

  const ScalarGrid weights = p.beta > 0 ? bubble_weight_sum(nx, ny, h, samples, p.sigma_g)
                                        : ScalarGrid(nx, ny, h);
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * (p.gamma > 0 ? 14 : 6));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Eigen::Index q = 2 * (static_cast<Eigen::Index>(j) * nx + i);
      const double g1 = grad_i(i, j, 0), g2 = grad_i(i, j, 1), it = i_t(i, j);
      const double wb = 2 * p.beta * area * weights(i, j);
      triplets.emplace_back(q, q, 2 * area * g1 * g1 + wb);
      triplets.emplace_back(q + 1, q + 1, 2 * area * g2 * g2 + wb);
      triplets.emplace_back(q, q + 1, 2 * area * g1 * g2);
      triplets.emplace_back(q + 1, q, 2 * area * g1 * g2);
      sys.rhs(q) -= 2 * area * it * g1;
      sys.rhs(q + 1) -= 2 * area * it * g2;
      sys.constant += area * it * it;
      // Graph Laplacian of the 4-neighbour edges, one edge at a time.
      auto edge = [&](Eigen::Index r) {
        for (int c = 0; c < 2; ++c) {
          triplets.emplace_back(q + c, q + c, 2 * p.alpha);
          triplets.emplace_back(r + c, r + c, 2 * p.alpha);
          triplets.emplace_back(q + c, r + c, -2 * p.alpha);
          triplets.emplace_back(r + c, q + c, -2 * p.alpha);
        }
      };
      if (p.alpha > 0) {
        if (i + 1 < nx) edge(q + 2);
        if (j + 1 < ny) edge(q + 2 * nx);
      }
    }
  }
  if (p.beta > 0) {
    for (const auto& s : samples) {
      const Vec2 xhat{s.position[0] * h, s.position[1] * h};
      const double norm2 = s.displacement[0] * s.displacement[0] +
                           s.displacement[1] * s.displacement[1];
      for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
          const double g = area * gaussian_weight({i * h, j * h}, xhat, p.sigma_g);
          const Eigen::Index q = 2 * (static_cast<Eigen::Index>(j) * nx + i);
          sys.rhs(q) += 2 * p.beta * g * s.displacement[0];
          sys.rhs(q + 1) += 2 * p.beta * g * s.displacement[1];
          sys.constant += p.beta * g * norm2;
        }
      }
    }
  }
  if (p.gamma > 0) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        const CellDivergence cd = cell_divergence(i, j, nx, h);
        for (int a = 0; a < 8; ++a) {
          for (int b = 0; b < 8; ++b) {
            triplets.emplace_back(cd.dof[a], cd.dof[b], 2 * p.gamma * area * cd.coef[a] * cd.coef[b]);
          }
        }
      }
    }
  }
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.matrix.makeCompressed();
  return sys;
}

VectorGrid gradient(const FlowSystem& sys, const VectorGrid& u) {
  if (u.nx() != sys.nx || u.ny() != sys.ny) {
    throw Error(ErrorKind::ShapeMismatch, "flow field does not match the system");
  }
  const Eigen::VectorXd r = sys.matrix * as_vector(u) - sys.rhs;
  return to_grid(r, sys.nx, sys.ny, sys.spacing);
}

VectorGrid gradient(const VectorGrid& u, const VectorGrid& grad_i, const ScalarGrid& i_t,
                    const SampleList& samples, const FlowParams& p) {
  if (!u.same_shape(grad_i)) throw Error(ErrorKind::ShapeMismatch, "flow field extents differ");
  return gradient(assemble(grad_i, i_t, samples, p), u);
}

Eigen::VectorXd conjugate_gradient(const Eigen::SparseMatrix<double>& a,
                                   const Eigen::VectorXd& rhs, double tol, int max_iter) {
  const auto& k = kernels::active();
  const Eigen::Index n = rhs.size();
  // Symmetric, so the column-major storage is also the CSR form of A.
  Eigen::SparseMatrix<double, Eigen::RowMajor, std::int32_t> csr = a;
  csr.makeCompressed();
  const kernels::CsrView view{
      {csr.outerIndexPtr(), static_cast<std::size_t>(n) + 1},
      {csr.innerIndexPtr(), static_cast<std::size_t>(csr.nonZeros())},
      {csr.valuePtr(), static_cast<std::size_t>(csr.nonZeros())}};
  const std::size_t len = static_cast<std::size_t>(n);

  Eigen::VectorXd inv_diag(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double d = csr.coeff(r, r);
    if (!(d > 0)) throw Error(ErrorKind::NotSPD, "nonpositive diagonal entry in CG system");
    inv_diag(r) = 1.0 / d;
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  Eigen::VectorXd dir = z;
  Eigen::VectorXd ad(n);
  const double bnorm = std::sqrt(k.dot(rhs.data(), rhs.data(), len));
  if (bnorm == 0.0) return x;
  double rz = k.dot(r.data(), z.data(), len);
  double rel = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    k.spmv(view, dir.data(), ad.data());
    const double curvature = k.dot(dir.data(), ad.data(), len);
    if (!(curvature > 0)) throw Error(ErrorKind::NotSPD, "CG met a nonpositive curvature");
    const double step = rz / curvature;
    k.axpy(step, dir.data(), x.data(), len);
    k.axpy(-step, ad.data(), r.data(), len);
    rel = std::sqrt(k.dot(r.data(), r.data(), len)) / bnorm;
    if (rel <= tol) return x;
    z = inv_diag.cwiseProduct(r);
    const double rz_next = k.dot(r.data(), z.data(), len);
    k.xpby(z.data(), rz_next / rz, dir.data(), len);
    rz = rz_next;
  }
  throw NotConvergedError("conjugate gradients did not reach the tolerance", rel, max_iter);
}

DescentResult gradient_descent(const FlowSystem& sys, const VectorGrid& init,
                               const FlowParams& p) {
  if (init.nx() != sys.nx || init.ny() != sys.ny) {
    throw Error(ErrorKind::ShapeMismatch, "initial field does not match the system");
  }
  const auto& k = kernels::active();
  Eigen::VectorXd u = as_vector(init);
  const std::size_t len = static_cast<std::size_t>(u.size());
  const int cap = iteration_cap(p, u.size());
  const double bnorm = sys.rhs.norm();
  auto objective = [&](const Eigen::VectorXd& v) {
    return 0.5 * v.dot(sys.matrix * v) - sys.rhs.dot(v) + sys.constant;
  };
  DescentResult result{init, {objective(u)}, 0};
  Eigen::VectorXd r = sys.matrix * u - sys.rhs;
  double rel = bnorm > 0 ? r.norm() / bnorm : r.norm();
  while (rel > p.tol && !(bnorm == 0 && r.norm() == 0)) {
    if (result.iterations >= cap) {
      throw NotConvergedError("gradient descent did not reach the tolerance", rel, cap);
    }
    const Eigen::VectorXd ar = sys.matrix * r;
    const double rr = k.dot(r.data(), r.data(), len);
    const double rar = k.dot(r.data(), ar.data(), len);
    if (!(rar > 0)) throw Error(ErrorKind::NotSPD, "nonpositive curvature in gradient descent");
    const double omega = rr / rar;
    k.axpy(-omega, r.data(), u.data(), len);
    k.axpy(-omega, ar.data(), r.data(), len);
    ++result.iterations;
    result.objective.push_back(objective(u));
    rel = bnorm > 0 ? r.norm() / bnorm : r.norm();
  }
  result.u = to_grid(u, sys.nx, sys.ny, sys.spacing);
  return result;
}

DescentResult gradient_descent_flow(const VectorGrid& init, const VectorGrid& grad_i,
                                    const ScalarGrid& i_t, const SampleList& samples,
                                    const FlowParams& p) {
  return gradient_descent(assemble(grad_i, i_t, samples, p), init, p);
}

VectorGrid solve_flow(const FlowSystem& sys, const FlowParams& p) {
  switch (p.solver) {
    case Solver::Direct: {
      Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(sys.matrix);
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::NotSPD, "sparse Cholesky factorization failed");
      }
      return to_grid(llt.solve(sys.rhs), sys.nx, sys.ny, sys.spacing);
    }
    case Solver::ConjugateGradient:
      return to_grid(conjugate_gradient(sys.matrix, sys.rhs, p.tol,
                                        iteration_cap(p, sys.rhs.size())),
                     sys.nx, sys.ny, sys.spacing);
    case Solver::GradientDescent:
      return gradient_descent(sys, VectorGrid(sys.nx, sys.ny, sys.spacing), p).u;
  }
  throw Error(ErrorKind::DomainError, "unknown solver");
}

SampleList coarsen_samples(const SampleList& samples, int nx_fine, int ny_fine, int nx_coarse,
                           int ny_coarse) {
  const double rx = static_cast<double>(nx_coarse) / nx_fine;
  const double ry = static_cast<double>(ny_coarse) / ny_fine;
  SampleList out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back({{to_coarse(s.position[0], nx_fine, nx_coarse),
                    to_coarse(s.position[1], ny_fine, ny_coarse), s.position[2]},
                   {s.displacement[0] * rx, s.displacement[1] * ry, s.displacement[2]}});
  }
  return out;
}

ScalarGrid warp(const ScalarGrid& image, const VectorGrid& u) {
  if (!u.same_shape(image)) throw Error(ErrorKind::ShapeMismatch, "warp field extents differ");
  ScalarGrid out(image.nx(), image.ny(), image.spacing());
  const double h = image.spacing();
  for (int j = 0; j < image.ny(); ++j) {
    for (int i = 0; i < image.nx(); ++i) {
      out(i, j) = sample_bilinear(image, i + u(i, j, 0) / h, j + u(i, j, 1) / h);
    }
  }
  return out;
}

VectorGrid multiscale_flow(const ScalarGrid& i1, const ScalarGrid& i2, const SampleList& samples,
                           const FlowParams& p) {
  validate(p);
  if (!i1.same_shape(i2)) throw Error(ErrorKind::ShapeMismatch, "image extents differ");
  std::vector<ScalarGrid> first{i1}, second{i2};
  std::vector<SampleList> level_samples{samples};
  for (int s = 1; s < p.levels; ++s) {
    first.push_back(downsample(first.back(), p.eta, p.sigma0));
    second.push_back(downsample(second.back(), p.eta, p.sigma0));
    const auto& fine = first[s - 1];
    const auto& coarse = first[s];
    level_samples.push_back(
        coarsen_samples(level_samples.back(), fine.nx(), fine.ny(), coarse.nx(), coarse.ny()));
  }

  VectorGrid u;
  for (int s = p.levels - 1; s >= 0; --s) {
    const ScalarGrid& a = first[s];
    const ScalarGrid& b = second[s];
    VectorGrid initial(a.nx(), a.ny(), a.spacing());
    if (s != p.levels - 1) {
      // Pixel-unit displacements grow with the per-axis resolution ratio.
      initial = prolong(u, a.nx(), a.ny(), 1.0);
      const double rx = static_cast<double>(a.nx()) / u.nx(), ry = static_cast<double>(a.ny()) / u.ny();
      for (std::size_t q = 0; q < initial.points(); ++q) {
        initial.values()[2 * q] *= rx;
        initial.values()[2 * q + 1] *= ry;
      }
    }
    // Linearise the data term around the current estimate: the warped
    // residual minus grad I . u0 keeps the functional expressed in u itself.
    const VectorGrid grad = spatial_gradient(a);
    ScalarGrid i_t = temporal_difference(a, warp(b, initial));
    for (int j = 0; j < a.ny(); ++j) {
      for (int i = 0; i < a.nx(); ++i) {
        i_t(i, j) -= grad(i, j, 0) * initial(i, j, 0) + grad(i, j, 1) * initial(i, j, 1);
      }
    }
    const FlowSystem sys = assemble(grad, i_t, level_samples[s], p);
    // Correction solve: a(h, v) = b(v) - a(u0, v).
    FlowSystem correction = sys;
    correction.rhs = sys.rhs - sys.matrix * as_vector(initial);
    const VectorGrid h = solve_flow(correction, p);
    u = initial;
    for (std::size_t k = 0; k < u.values().size(); ++k) u.values()[k] += h.values()[k];
  }
  return u;
}

}  // namespace speckleflow::flow
