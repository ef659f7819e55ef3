#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "speckleflow/elastic.hpp"
#include "speckleflow/io.hpp"

namespace speckleflow::invert {

enum class StepRule {
  /// |s|^2 / |F' s|^2 with s = F'^* r.
  Steepest,
  /// |r|^2 / |s|^2.
  MinimalError,
  Constant,
  /// Denominator |F'^* s|^2 taken literally. Applying the adjoint to a
  /// parameter-space vector is undefined, so selecting it is an error.
  Printed,
};

enum class StopRule { Discrepancy, Heuristic, Manual };

struct InversionConfig {
  elastic::LameField initial;
  double tau = 1.5;
  double delta = 0.0;
  int max_iter = 100;
  bool acceleration = true;
  StepRule stepsize = StepRule::Steepest;
  double omega = 1.0;
  /// Same extents as the parameters; 1 marks a known (frozen) cell.
  std::optional<ScalarGrid> boundary_mask;
  StopRule stopping = StopRule::Discrepancy;
  /// Iteration count for manual stopping.
  int manual_k = 0;
  double mu_floor = elastic::kMuFloor;
};

void validate(const InversionConfig& cfg);

/// Keys tau, delta, max_iter, acceleration, stepsize (steepest |
/// minimal_error | constant:<omega> | printed), stopping (discrepancy |
/// heuristic | manual:<k>), mask_file, lambda0, mu0. The uniform initial
/// field and the mask need the parameter extents.
InversionConfig parse_inversion_config(const io::KeyValues& kv, int cells_x, int cells_y,
                                       double spacing = 1.0);

struct TraceEntry {
  int k = 0;
  double residual = 0.0;
  double stepsize = 0.0;
  double heuristic = 0.0;
};

using IterationTrace = std::vector<TraceEntry>;

void write_trace_csv(std::ostream& out, const IterationTrace& trace);

struct StepResult {
  elastic::LameField params;
  double stepsize = 0.0;
  /// |F(p) - u_delta| at the input parameters.
  double residual = 0.0;
};

/// One projected, masked Landweber step from p.
StepResult landweber_step(const elastic::LameField& p, const VectorGrid& udelta,
                          const elastic::BoundaryConditions& bc, const InversionConfig& cfg);

/// (k - 1) / (k + 2).
double nesterov_alpha(int k);

struct InversionResult {
  elastic::LameField params;
  IterationTrace trace;
  /// Trace index of the returned iterate.
  int stop_index = 0;
  bool max_iter_reached = false;
};

/// Accelerated (or plain, with acceleration off) Landweber iteration with the
/// configured stopping rule. Trace entry k holds the residual at iterate k,
/// entry 0 being the initial guess.
InversionResult nesterov_iterate(const InversionConfig& cfg, const VectorGrid& udelta,
                                 const elastic::BoundaryConditions& bc);

/// First trace index with residual <= tau * delta.
std::optional<int> stop_discrepancy(const IterationTrace& trace, double tau, double delta);

/// Trace index minimising sqrt(k) * residual over entries with k >= 1
/// (k = 0 only when it is the sole entry). Ties pick the smallest k.
int stop_heuristic(const IterationTrace& trace);

struct FieldError {
  double total = 0.0;
  double x = 0.0;
  double y = 0.0;
};

/// Relative l2 errors of the whole field and of each component.
FieldError field_error(const VectorGrid& estimate, const VectorGrid& truth);

}  // namespace speckleflow::invert
