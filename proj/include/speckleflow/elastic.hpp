#pragma once

#include <Eigen/SparseCore>
#include <array>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "speckleflow/grid.hpp"
#include "speckleflow/io.hpp"

namespace speckleflow::elastic {

inline constexpr double kMuFloor = 1e-6;

/// Lamé parameters, constant on each grid cell. A displacement grid of
/// nx-by-ny nodes pairs with a LameField of (nx-1)-by-(ny-1) cells.
/// Also used for parameter-space directions, which may be negative.
struct LameField {
  ScalarGrid lambda;
  ScalarGrid mu;

  int nx() const noexcept { return lambda.nx(); }
  int ny() const noexcept { return lambda.ny(); }
  double spacing() const noexcept { return lambda.spacing(); }
};

LameField uniform_lame(int cells_x, int cells_y, double lambda, double mu, double spacing = 1.0);

/// Checks matching extents, lambda >= 0 and mu >= mu_floor.
void validate(const LameField& p, double mu_floor = kMuFloor);

/// Pointwise clipping onto lambda >= 0, mu >= mu_floor.
LameField project(const LameField& p, double mu_floor = kMuFloor);

/// F64GRID with ncomp = 2, (lambda, mu) interleaved per cell.
io::F64Grid to_f64grid(const LameField& p);
LameField lame_from_f64grid(const io::F64Grid& g, double spacing = 1.0);

enum class Side { Top, Bottom, Left, Right };
enum class Components { X, Y, Both };

Side parse_side(const std::string& name);
std::string to_string(Side side);

struct DirichletSegment {
  Side side = Side::Bottom;
  Components components = Components::Both;
  double value = 0.0;
  /// Optional per-node values along the side (left to right, or top to
  /// bottom). Overrides value when nonempty.
  std::vector<Vec2> profile;
};

struct TractionSegment {
  Side side = Side::Top;
  Vec2 traction{0.0, 0.0};
};

/// Top is row 0, so +y points down into the sample.
struct BoundaryConditions {
  std::vector<DirichletSegment> dirichlet;
  std::vector<TractionSegment> traction;
  /// Nodal body force; empty means zero.
  VectorGrid body_force;
};

/// Lines "dirichlet <side> <ux|uy|both> <value>" and
/// "traction <side> <tx> <ty>"; '#' comments and blank lines are ignored.
BoundaryConditions parse_boundary_conditions(std::istream& in);
BoundaryConditions read_boundary_conditions(const std::filesystem::path& path);
void write_boundary_conditions(std::ostream& out, const BoundaryConditions& bc);

void validate(const BoundaryConditions& bc);

/// Element matrices on the unit square for div-div and 2 E:E. Local node
/// order is (0,0), (1,0), (0,1), (1,1), two dofs per node. The 2-D Q1
/// stiffness is independent of the cell size.
const std::array<std::array<double, 8>, 8>& element_matrix_lambda();
const std::array<std::array<double, 8>, 8>& element_matrix_mu();

/// Assembled, factorised forward operator for one LameField. Reused across
/// forward, derivative and adjoint solves.
class ForwardModel {
 public:
  ForwardModel(const LameField& p, const BoundaryConditions& bc);
  ~ForwardModel();
  ForwardModel(ForwardModel&&) noexcept;
  ForwardModel& operator=(ForwardModel&&) noexcept;

  int nodes_x() const noexcept { return nx_; }
  int nodes_y() const noexcept { return ny_; }
  double spacing() const noexcept { return h_; }

  /// Total displacement including the Dirichlet lift.
  VectorGrid solve() const;

  /// w with zero Dirichlet data and a(w, v) = -(h_lambda div u div v + 2 h_mu E(u):E(v)).
  VectorGrid derivative(const VectorGrid& u, const LameField& h) const;

  /// Adjoint-state gradient of <F'(p) h, w> with respect to h.
  LameField adjoint(const VectorGrid& u, const VectorGrid& w) const;

  /// Lift Phi: Dirichlet values on constrained dofs, zero elsewhere.
  VectorGrid lift() const;

  /// Dofs carrying Dirichlet data, by interleaved index.
  const std::vector<bool>& fixed() const noexcept { return fixed_; }

  /// Full stiffness with no boundary treatment.
  const Eigen::SparseMatrix<double>& stiffness() const noexcept { return k_full_; }
  /// Stiffness restricted to free dofs.
  const Eigen::SparseMatrix<double>& reduced_stiffness() const noexcept { return k_free_; }

 private:
  Eigen::VectorXd solve_free(const Eigen::VectorXd& load) const;

  struct Factor;
  int nx_ = 0;
  int ny_ = 0;
  double h_ = 1.0;
  LameField params_;
  std::vector<bool> fixed_;
  std::vector<Eigen::Index> free_index_;
  Eigen::VectorXd lift_;
  Eigen::VectorXd load_;
  Eigen::SparseMatrix<double> k_full_;
  Eigen::SparseMatrix<double> k_free_;
  std::unique_ptr<Factor> factor_;
};

VectorGrid forward_solve(const LameField& p, const BoundaryConditions& bc);
VectorGrid frechet_apply(const LameField& p, const VectorGrid& u, const LameField& h,
                         const BoundaryConditions& bc);
LameField frechet_adjoint(const LameField& p, const VectorGrid& u, const VectorGrid& w,
                          const BoundaryConditions& bc);

/// a_{lambda,mu}(u, v).
double bilinear_form(const LameField& p, const VectorGrid& u, const VectorGrid& v);

/// l(v): body force and traction work.
double load_functional(const LameField& p, const BoundaryConditions& bc, const VectorGrid& v);

/// L2 inner products matching the adjoint: nodal for displacements,
/// cellwise for parameters, both weighted by spacing^2.
double inner_product(const VectorGrid& a, const VectorGrid& b);
double inner_product(const LameField& a, const LameField& b);
double norm(const VectorGrid& a);
double norm(const LameField& a);

/// E = mu (3 lambda + 2 mu) / (lambda + mu).
ScalarGrid young_modulus(const LameField& p);
double young_modulus(double lambda, double mu);

}  // namespace speckleflow::elastic
