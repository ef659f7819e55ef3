#include "speckleflow/elastic.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "speckleflow/error.hpp"

namespace speckleflow::elastic {
namespace {

using Matrix8 = std::array<std::array<double, 8>, 8>;
using Triplet = Eigen::Triplet<double>;

struct ElementMatrices {
  Matrix8 lambda{};
  Matrix8 mu{};
};

ElementMatrices build_element_matrices() {
  ElementMatrices m;
  const double g = 0.5 / std::sqrt(3.0);
  const double pts[2] = {0.5 - g, 0.5 + g};
  for (double xi : pts) {
    for (double eta : pts) {
      // Derivatives of (1-x)(1-y), x(1-y), (1-x)y, xy.
      const double dx[4] = {-(1 - eta), 1 - eta, -eta, eta};
      const double dy[4] = {-(1 - xi), -xi, 1 - xi, xi};
      std::array<double, 8> div{}, e11{}, e22{}, shear{};
      for (int a = 0; a < 4; ++a) {
        div[2 * a] = dx[a];
        div[2 * a + 1] = dy[a];
        e11[2 * a] = dx[a];
        e22[2 * a + 1] = dy[a];
        shear[2 * a] = dy[a];
        shear[2 * a + 1] = dx[a];
      }
      for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) {
          m.lambda[r][c] += 0.25 * div[r] * div[c];
          m.mu[r][c] += 0.25 * (2 * e11[r] * e11[c] + 2 * e22[r] * e22[c] + shear[r] * shear[c]);
        }
      }
    }
  }
  return m;
}

const ElementMatrices& element_matrices() {
  static const ElementMatrices m = build_element_matrices();
  return m;
}

std::array<Eigen::Index, 8> cell_dofs(int i, int j, int nx) {
  const Eigen::Index n00 = static_cast<Eigen::Index>(j) * nx + i;
  const Eigen::Index n10 = n00 + 1, n01 = n00 + nx, n11 = n01 + 1;
  return {2 * n00, 2 * n00 + 1, 2 * n10, 2 * n10 + 1, 2 * n01, 2 * n01 + 1, 2 * n11, 2 * n11 + 1};
}

void check_pair(const LameField& p, const VectorGrid& u) {
  if (p.lambda.nx() != p.mu.nx() || p.lambda.ny() != p.mu.ny()) {
    throw Error(ErrorKind::ShapeMismatch, "lambda and mu extents differ");
  }
  if (u.nx() != p.nx() + 1 || u.ny() != p.ny() + 1) {
    throw Error(ErrorKind::ShapeMismatch, "displacement nodes must be one more than cells per axis");
  }
}

/// Element-wise accumulation of the parameter-weighted element matrices.
template <typename Fn>
void for_each_cell(int cells_x, int cells_y, int nx, Fn&& fn) {
  for (int j = 0; j < cells_y; ++j) {
    for (int i = 0; i < cells_x; ++i) fn(i, j, cell_dofs(i, j, nx));
  }
}

double quad(const Matrix8& k, std::span<const double> u, std::span<const double> v,
            const std::array<Eigen::Index, 8>& dofs) {
  double s = 0.0;
  for (int r = 0; r < 8; ++r) {
    double row = 0.0;
    for (int c = 0; c < 8; ++c) row += k[r][c] * v[dofs[c]];
    s += u[dofs[r]] * row;
  }
  return s;
}

int side_length(Side side, int nx, int ny) {
  return side == Side::Top || side == Side::Bottom ? nx : ny;
}

Eigen::Index side_node(Side side, int t, int nx, int ny) {
  switch (side) {
    case Side::Top: return t;
    case Side::Bottom: return static_cast<Eigen::Index>(ny - 1) * nx + t;
    case Side::Left: return static_cast<Eigen::Index>(t) * nx;
    case Side::Right: return static_cast<Eigen::Index>(t) * nx + nx - 1;
  }
  return 0;
}

}  // namespace

LameField uniform_lame(int cells_x, int cells_y, double lambda, double mu, double spacing) {
  return {ScalarGrid(cells_x, cells_y, spacing, lambda), ScalarGrid(cells_x, cells_y, spacing, mu)};
}

void validate(const LameField& p, double mu_floor) {
  if (!p.lambda.same_shape(p.mu)) throw Error(ErrorKind::ShapeMismatch, "lambda and mu extents differ");
  for (double v : p.lambda.values()) {
    if (!(v >= 0)) throw Error(ErrorKind::DomainError, "lambda must be nonnegative");
  }
  for (double v : p.mu.values()) {
    if (!(v >= mu_floor)) throw Error(ErrorKind::DomainError, "mu below its floor");
  }
}

LameField project(const LameField& p, double mu_floor) {
  LameField out = p;
  for (double& v : out.lambda.values()) v = std::max(v, 0.0);
  for (double& v : out.mu.values()) v = std::max(v, mu_floor);
  return out;
}

io::F64Grid to_f64grid(const LameField& p) {
  io::F64Grid g{2, p.nx(), p.ny(), 1, {}};
  g.data.reserve(2 * p.lambda.size());
  for (std::size_t k = 0; k < p.lambda.size(); ++k) {
    g.data.push_back(p.lambda.values()[k]);
    g.data.push_back(p.mu.values()[k]);
  }
  return g;
}

LameField lame_from_f64grid(const io::F64Grid& g, double spacing) {
  if (g.ncomp != 2 || g.nz != 1) {
    throw Error(ErrorKind::ShapeMismatch, "a Lame field is a two-component planar F64GRID");
  }
  LameField p = uniform_lame(g.nx, g.ny, 0.0, 0.0, spacing);
  for (std::size_t k = 0; k < p.lambda.size(); ++k) {
    p.lambda.values()[k] = g.data[2 * k];
    p.mu.values()[k] = g.data[2 * k + 1];
  }
  return p;
}

Side parse_side(const std::string& name) {
  if (name == "top") return Side::Top;
  if (name == "bottom") return Side::Bottom;
  if (name == "left") return Side::Left;
  if (name == "right") return Side::Right;
  throw Error(ErrorKind::FormatError, "unknown side '" + name + "'");
}

std::string to_string(Side side) {
  switch (side) {
    case Side::Top: return "top";
    case Side::Bottom: return "bottom";
    case Side::Left: return "left";
    case Side::Right: return "right";
  }
  return "top";
}

BoundaryConditions parse_boundary_conditions(std::istream& in) {
  BoundaryConditions bc;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    std::istringstream ls(line.substr(0, line.find('#')));
    std::string kind;
    if (!(ls >> kind)) continue;
    std::string side, extra;
    if (kind == "dirichlet") {
      std::string comp;
      DirichletSegment seg;
      if (!(ls >> side >> comp >> seg.value) || (ls >> extra)) {
        throw FormatError("expected 'dirichlet <side> <ux|uy|both> <value>'", line_start);
      }
      seg.side = parse_side(side);
      if (comp == "ux") seg.components = Components::X;
      else if (comp == "uy") seg.components = Components::Y;
      else if (comp == "both") seg.components = Components::Both;
      else throw FormatError("unknown component '" + comp + "'", line_start);
      bc.dirichlet.push_back(seg);
    } else if (kind == "traction") {
      TractionSegment seg;
      if (!(ls >> side >> seg.traction[0] >> seg.traction[1]) || (ls >> extra)) {
        throw FormatError("expected 'traction <side> <tx> <ty>'", line_start);
      }
      seg.side = parse_side(side);
      bc.traction.push_back(seg);
    } else {
      throw FormatError("unknown boundary condition '" + kind + "'", line_start);
    }
  }
  validate(bc);
  return bc;
}

BoundaryConditions read_boundary_conditions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "' for reading");
  return parse_boundary_conditions(in);
}

void write_boundary_conditions(std::ostream& out, const BoundaryConditions& bc) {
  for (const auto& d : bc.dirichlet) {
    if (!d.profile.empty()) {
      throw Error(ErrorKind::DomainError, "per-node Dirichlet profiles have no text form");
    }
    const char* comp = d.components == Components::X ? "ux" : d.components == Components::Y ? "uy" : "both";
    out << "dirichlet " << to_string(d.side) << ' ' << comp << ' ' << io::format_double(d.value) << '\n';
  }
  for (const auto& t : bc.traction) {
    out << "traction " << to_string(t.side) << ' ' << io::format_double(t.traction[0]) << ' '
        << io::format_double(t.traction[1]) << '\n';
  }
}

void validate(const BoundaryConditions& bc) {
  if (bc.dirichlet.empty()) {
    throw Error(ErrorKind::SpecError, "at least one Dirichlet segment is required");
  }
  for (const auto& t : bc.traction) {
    for (const auto& d : bc.dirichlet) {
      if (d.side == t.side) {
        throw Error(ErrorKind::SpecError, "side '" + to_string(t.side) + "' is both Dirichlet and traction");
      }
    }
  }
}

const Matrix8& element_matrix_lambda() { return element_matrices().lambda; }
const Matrix8& element_matrix_mu() { return element_matrices().mu; }

struct ForwardModel::Factor {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
};

ForwardModel::~ForwardModel() = default;
ForwardModel::ForwardModel(ForwardModel&&) noexcept = default;
ForwardModel& ForwardModel::operator=(ForwardModel&&) noexcept = default;

ForwardModel::ForwardModel(const LameField& p, const BoundaryConditions& bc)
    : nx_(p.nx() + 1), ny_(p.ny() + 1), h_(p.spacing()), params_(p) {
  if (!p.lambda.same_shape(p.mu)) throw Error(ErrorKind::ShapeMismatch, "lambda and mu extents differ");
  validate(bc);
  const Eigen::Index n = 2 * static_cast<Eigen::Index>(nx_) * ny_;
  const auto& em = element_matrices();

  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(p.lambda.size()) * 64);
  for_each_cell(p.nx(), p.ny(), nx_, [&](int i, int j, const std::array<Eigen::Index, 8>& dofs) {
    const double lam = p.lambda(i, j), mu = p.mu(i, j);
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        triplets.emplace_back(dofs[r], dofs[c], lam * em.lambda[r][c] + mu * em.mu[r][c]);
      }
    }
  });
  k_full_.resize(n, n);
  k_full_.setFromTriplets(triplets.begin(), triplets.end());

  fixed_.assign(static_cast<std::size_t>(n), false);
  lift_ = Eigen::VectorXd::Zero(n);
  for (const auto& seg : bc.dirichlet) {
    const int len = side_length(seg.side, nx_, ny_);
    if (!seg.profile.empty() && static_cast<int>(seg.profile.size()) != len) {
      throw Error(ErrorKind::ShapeMismatch, "Dirichlet profile length does not match the side");
    }
    for (int t = 0; t < len; ++t) {
      const Eigen::Index node = side_node(seg.side, t, nx_, ny_);
      for (int c = 0; c < 2; ++c) {
        if ((c == 0 && seg.components == Components::Y) || (c == 1 && seg.components == Components::X)) {
          continue;
        }
        fixed_[2 * node + c] = true;
        lift_(2 * node + c) = seg.profile.empty() ? seg.value : seg.profile[t][c];
      }
    }
  }

  load_ = Eigen::VectorXd::Zero(n);
  if (bc.body_force.points() != 0) {
    if (bc.body_force.nx() != nx_ || bc.body_force.ny() != ny_) {
      throw Error(ErrorKind::ShapeMismatch, "body force must live on the displacement nodes");
    }
    // Lumped: each node receives a quarter of every adjacent cell.
    for_each_cell(p.nx(), p.ny(), nx_, [&](int, int, const std::array<Eigen::Index, 8>& dofs) {
      for (int r = 0; r < 8; ++r) load_(dofs[r]) += 0.25 * h_ * h_ * bc.body_force.values()[dofs[r]];
    });
  }
  for (const auto& seg : bc.traction) {
    const int len = side_length(seg.side, nx_, ny_);
    for (int t = 0; t + 1 < len; ++t) {
      for (const Eigen::Index node : {side_node(seg.side, t, nx_, ny_), side_node(seg.side, t + 1, nx_, ny_)}) {
        load_(2 * node) += 0.5 * h_ * seg.traction[0];
        load_(2 * node + 1) += 0.5 * h_ * seg.traction[1];
      }
    }
  }

  free_index_.assign(static_cast<std::size_t>(n), -1);
  Eigen::Index nfree = 0;
  for (Eigen::Index d = 0; d < n; ++d) {
    if (!fixed_[d]) free_index_[d] = nfree++;
  }
  std::vector<Triplet> reduced;
  reduced.reserve(static_cast<std::size_t>(k_full_.nonZeros()));
  for (Eigen::Index col = 0; col < k_full_.outerSize(); ++col) {
    if (fixed_[col]) continue;
    for (Eigen::SparseMatrix<double>::InnerIterator it(k_full_, col); it; ++it) {
      if (!fixed_[it.row()]) reduced.emplace_back(free_index_[it.row()], free_index_[col], it.value());
    }
  }
  k_free_.resize(nfree, nfree);
  k_free_.setFromTriplets(reduced.begin(), reduced.end());
  factor_ = std::make_unique<Factor>();
  if (nfree > 0) {
    factor_->llt.compute(k_free_);
    if (factor_->llt.info() != Eigen::Success) {
      throw Error(ErrorKind::SingularSystem,
                  "elasticity system is not positive definite; check the boundary conditions");
    }
  }
}

Eigen::VectorXd ForwardModel::solve_free(const Eigen::VectorXd& load) const {
  Eigen::VectorXd rhs(k_free_.rows());
  for (Eigen::Index d = 0; d < load.size(); ++d) {
    if (!fixed_[d]) rhs(free_index_[d]) = load(d);
  }
  Eigen::VectorXd full = Eigen::VectorXd::Zero(load.size());
  if (rhs.size() == 0) return full;
  Eigen::VectorXd x = factor_->llt.solve(rhs);
  // One step of iterative refinement keeps the reduced residual near
  // round-off for stiff, nearly incompressible parameters.
  const Eigen::VectorXd res = rhs - k_free_ * x;
  x += factor_->llt.solve(res);
  for (Eigen::Index d = 0; d < load.size(); ++d) {
    if (!fixed_[d]) full(d) = x(free_index_[d]);
  }
  return full;
}

VectorGrid ForwardModel::lift() const {
  return VectorGrid(nx_, ny_, std::vector<double>(lift_.data(), lift_.data() + lift_.size()), h_);
}

VectorGrid ForwardModel::solve() const {
  const Eigen::VectorXd u = lift_ + solve_free(load_ - k_full_ * lift_);
  return VectorGrid(nx_, ny_, std::vector<double>(u.data(), u.data() + u.size()), h_);
}

VectorGrid ForwardModel::derivative(const VectorGrid& u, const LameField& h) const {
  check_pair(params_, u);
  if (!h.lambda.same_shape(params_.lambda) || !h.mu.same_shape(params_.lambda)) {
    throw Error(ErrorKind::ShapeMismatch, "parameter direction extents differ");
  }
  const auto& em = element_matrices();
  const auto uv = u.values();
  Eigen::VectorXd load = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(uv.size()));
  for_each_cell(params_.nx(), params_.ny(), nx_, [&](int i, int j, const std::array<Eigen::Index, 8>& dofs) {
    const double hl = h.lambda(i, j), hm = h.mu(i, j);
    if (hl == 0.0 && hm == 0.0) return;
    for (int r = 0; r < 8; ++r) {
      double s = 0.0;
      for (int c = 0; c < 8; ++c) s += (hl * em.lambda[r][c] + hm * em.mu[r][c]) * uv[dofs[c]];
      load(dofs[r]) -= s;
    }
  });
  const Eigen::VectorXd w = solve_free(load);
  return VectorGrid(nx_, ny_, std::vector<double>(w.data(), w.data() + w.size()), h_);
}

LameField ForwardModel::adjoint(const VectorGrid& u, const VectorGrid& w) const {
  check_pair(params_, u);
  if (!w.same_shape(u)) throw Error(ErrorKind::ShapeMismatch, "adjoint source extents differ");
  const double area = h_ * h_;
  Eigen::VectorXd load(static_cast<Eigen::Index>(w.values().size()));
  for (Eigen::Index d = 0; d < load.size(); ++d) load(d) = area * w.values()[d];
  const Eigen::VectorXd q = solve_free(load);
  const std::span<const double> qs(q.data(), static_cast<std::size_t>(q.size()));
  const auto& em = element_matrices();
  LameField g = uniform_lame(params_.nx(), params_.ny(), 0.0, 0.0, h_);
  for_each_cell(params_.nx(), params_.ny(), nx_, [&](int i, int j, const std::array<Eigen::Index, 8>& dofs) {
    g.lambda(i, j) = -quad(em.lambda, u.values(), qs, dofs) / area;
    g.mu(i, j) = -quad(em.mu, u.values(), qs, dofs) / area;
  });
  return g;
}

VectorGrid forward_solve(const LameField& p, const BoundaryConditions& bc) {
  validate(p);
  return ForwardModel(p, bc).solve();
}

VectorGrid frechet_apply(const LameField& p, const VectorGrid& u, const LameField& h,
                         const BoundaryConditions& bc) {
  validate(p);
  return ForwardModel(p, bc).derivative(u, h);
}

LameField frechet_adjoint(const LameField& p, const VectorGrid& u, const VectorGrid& w,
                          const BoundaryConditions& bc) {
  validate(p);
  return ForwardModel(p, bc).adjoint(u, w);
}

double bilinear_form(const LameField& p, const VectorGrid& u, const VectorGrid& v) {
  check_pair(p, u);
  check_pair(p, v);
  const auto& em = element_matrices();
  double s = 0.0;
  for_each_cell(p.nx(), p.ny(), p.nx() + 1, [&](int i, int j, const std::array<Eigen::Index, 8>& dofs) {
    s += p.lambda(i, j) * quad(em.lambda, u.values(), v.values(), dofs) +
         p.mu(i, j) * quad(em.mu, u.values(), v.values(), dofs);
  });
  return s;
}

double load_functional(const LameField& p, const BoundaryConditions& bc, const VectorGrid& v) {
  check_pair(p, v);
  double s = 0.0;
  const double h = p.spacing();
  if (bc.body_force.points() != 0) {
    for_each_cell(p.nx(), p.ny(), p.nx() + 1, [&](int, int, const std::array<Eigen::Index, 8>& dofs) {
      for (int r = 0; r < 8; ++r) s += 0.25 * h * h * bc.body_force.values()[dofs[r]] * v.values()[dofs[r]];
    });
  }
  for (const auto& seg : bc.traction) {
    const int len = side_length(seg.side, v.nx(), v.ny());
    for (int t = 0; t + 1 < len; ++t) {
      for (const Eigen::Index node : {side_node(seg.side, t, v.nx(), v.ny()), side_node(seg.side, t + 1, v.nx(), v.ny())}) {
        s += 0.5 * h * (seg.traction[0] * v.values()[2 * node] + seg.traction[1] * v.values()[2 * node + 1]);
      }
    }
  }
  return s;
}

double inner_product(const VectorGrid& a, const VectorGrid& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::ShapeMismatch, "inner product extents differ");
  double s = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k) s += a.values()[k] * b.values()[k];
  return s * a.spacing() * a.spacing();
}

double inner_product(const LameField& a, const LameField& b) {
  if (!a.lambda.same_shape(b.lambda) || !a.mu.same_shape(b.mu)) {
    throw Error(ErrorKind::ShapeMismatch, "inner product extents differ");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.lambda.size(); ++k) {
    s += a.lambda.values()[k] * b.lambda.values()[k] + a.mu.values()[k] * b.mu.values()[k];
  }
  return s * a.spacing() * a.spacing();
}

double norm(const VectorGrid& a) { return std::sqrt(inner_product(a, a)); }
double norm(const LameField& a) { return std::sqrt(inner_product(a, a)); }

double young_modulus(double lambda, double mu) {
  if (lambda + mu == 0.0) throw Error(ErrorKind::DivisionByZero, "lambda + mu vanishes");
  return mu * (3 * lambda + 2 * mu) / (lambda + mu);
}

ScalarGrid young_modulus(const LameField& p) {
  if (!p.lambda.same_shape(p.mu)) throw Error(ErrorKind::ShapeMismatch, "lambda and mu extents differ");
  ScalarGrid e(p.nx(), p.ny(), p.spacing());
  for (std::size_t k = 0; k < e.size(); ++k) {
    e.values()[k] = young_modulus(p.lambda.values()[k], p.mu.values()[k]);
  }
  return e;
}

}  // namespace speckleflow::elastic
