#include "speckleflow/invert.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "speckleflow/error.hpp"

namespace speckleflow::invert {
namespace {

using elastic::LameField;

bool masked(const InversionConfig& cfg, std::size_t k) {
  return cfg.boundary_mask && cfg.boundary_mask->values()[k] != 0.0;
}

void apply_mask(const InversionConfig& cfg, LameField& direction) {
  if (!cfg.boundary_mask) return;
  for (std::size_t k = 0; k < direction.lambda.size(); ++k) {
    if (masked(cfg, k)) {
      direction.lambda.values()[k] = 0.0;
      direction.mu.values()[k] = 0.0;
    }
  }
}

VectorGrid difference(const VectorGrid& a, const VectorGrid& b) {
  VectorGrid d = a;
  for (std::size_t k = 0; k < d.values().size(); ++k) d.values()[k] -= b.values()[k];
  return d;
}

double residual_norm(const LameField& p, const VectorGrid& udelta, const elastic::BoundaryConditions& bc) {
  return elastic::norm(difference(elastic::ForwardModel(p, bc).solve(), udelta));
}

std::pair<std::string, std::string> split_option(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) return {text, {}};
  return {text.substr(0, colon), text.substr(colon + 1)};
}

double parse_number(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw Error(ErrorKind::FormatError, "key '" + key + "' has a malformed number '" + text + "'");
  }
  return v;
}

}  // namespace

void validate(const InversionConfig& cfg) {
  elastic::validate(cfg.initial, cfg.mu_floor);
  if (cfg.stopping == StopRule::Discrepancy && !(cfg.tau > 1)) {
    throw Error(ErrorKind::DomainError, "tau must exceed 1 for the discrepancy principle");
  }
  if (!(cfg.delta >= 0)) throw Error(ErrorKind::DomainError, "delta must be nonnegative");
  if (cfg.max_iter < 0) throw Error(ErrorKind::DomainError, "max_iter must be nonnegative");
  if (cfg.stopping == StopRule::Manual && (cfg.manual_k < 0 || cfg.manual_k > cfg.max_iter)) {
    throw Error(ErrorKind::DomainError, "manual stopping index must lie in [0, max_iter]");
  }
  if (cfg.stepsize == StepRule::Constant && !(cfg.omega > 0)) {
    throw Error(ErrorKind::DomainError, "constant stepsize must be positive");
  }
  if (cfg.boundary_mask && !cfg.boundary_mask->same_shape(cfg.initial.lambda)) {
    throw Error(ErrorKind::ShapeMismatch, "boundary mask extents differ from the parameters");
  }
}

InversionConfig parse_inversion_config(const io::KeyValues& kv, int cells_x, int cells_y,
                                       double spacing) {
  io::ConfigReader r(kv);
  InversionConfig cfg;
  cfg.tau = r.get_double("tau", cfg.tau);
  cfg.delta = r.get_double("delta", cfg.delta);
  cfg.max_iter = r.get_int("max_iter", cfg.max_iter);
  cfg.acceleration = r.get_bool("acceleration", cfg.acceleration);

  const auto [step, step_arg] = split_option(r.get_string("stepsize", "steepest"));
  if (step == "steepest") cfg.stepsize = StepRule::Steepest;
  else if (step == "minimal_error") cfg.stepsize = StepRule::MinimalError;
  else if (step == "printed") cfg.stepsize = StepRule::Printed;
  else if (step == "constant") {
    cfg.stepsize = StepRule::Constant;
    cfg.omega = parse_number("stepsize", step_arg);
  } else {
    throw Error(ErrorKind::FormatError, "unknown stepsize rule '" + step + "'");
  }

  const auto [stop, stop_arg] = split_option(r.get_string("stopping", "discrepancy"));
  if (stop == "discrepancy") cfg.stopping = StopRule::Discrepancy;
  else if (stop == "heuristic") cfg.stopping = StopRule::Heuristic;
  else if (stop == "manual") {
    cfg.stopping = StopRule::Manual;
    cfg.manual_k = static_cast<int>(parse_number("stopping", stop_arg));
  } else {
    throw Error(ErrorKind::FormatError, "unknown stopping rule '" + stop + "'");
  }

  const double lambda0 = r.get_double("lambda0", 490.0);
  const double mu0 = r.get_double("mu0", 10.0);
  cfg.initial = elastic::uniform_lame(cells_x, cells_y, lambda0, mu0, spacing);
  const std::string mask_file = r.get_string("mask_file", "");
  if (!mask_file.empty()) {
    ScalarGrid mask = io::to_scalar_grid(io::read_f64grid(std::filesystem::path(mask_file)));
    cfg.boundary_mask = ScalarGrid(mask.nx(), mask.ny(), {mask.values().begin(), mask.values().end()}, spacing);
  }
  r.reject_unknown();
  validate(cfg);
  return cfg;
}

void write_trace_csv(std::ostream& out, const IterationTrace& trace) {
  out << "k,residual,stepsize,heuristic\n";
  for (const auto& e : trace) {
    out << e.k << ',' << io::format_double(e.residual) << ',' << io::format_double(e.stepsize) << ','
        << io::format_double(e.heuristic) << '\n';
  }
}

StepResult landweber_step(const LameField& p, const VectorGrid& udelta,
                          const elastic::BoundaryConditions& bc, const InversionConfig& cfg) {
  const elastic::ForwardModel model(p, bc);
  const VectorGrid u = model.solve();
  if (!u.same_shape(udelta)) throw Error(ErrorKind::ShapeMismatch, "data extents differ from the model");
  const VectorGrid r = difference(u, udelta);
  StepResult out{p, 0.0, elastic::norm(r)};
  LameField s = model.adjoint(u, r);
  apply_mask(cfg, s);
  const double s2 = elastic::inner_product(s, s);
  if (s2 == 0.0) return out;
  switch (cfg.stepsize) {
    case StepRule::Steepest: {
      const double d = elastic::norm(model.derivative(u, s));
      if (d == 0.0) return out;
      out.stepsize = s2 / (d * d);
      break;
    }
    case StepRule::MinimalError:
      out.stepsize = out.residual * out.residual / s2;
      break;
    case StepRule::Constant:
      out.stepsize = cfg.omega;
      break;
    case StepRule::Printed:
      throw Error(ErrorKind::SpecError,
                  "the literal stepsize applies the adjoint to a parameter-space vector and is undefined");
  }
  for (std::size_t k = 0; k < s.lambda.size(); ++k) {
    if (masked(cfg, k)) continue;
    out.params.lambda.values()[k] -= out.stepsize * s.lambda.values()[k];
    out.params.mu.values()[k] -= out.stepsize * s.mu.values()[k];
  }
  out.params = elastic::project(out.params, cfg.mu_floor);
  return out;
}

double nesterov_alpha(int k) { return static_cast<double>(k - 1) / (k + 2); }

InversionResult nesterov_iterate(const InversionConfig& cfg, const VectorGrid& udelta,
                                 const elastic::BoundaryConditions& bc) {
  validate(cfg);
  InversionResult result;
  LameField x = cfg.initial;
  LameField previous = cfg.initial;
  LameField best_residual_iterate = x, best_heuristic_iterate = x;
  double best_residual = std::numeric_limits<double>::infinity();
  int best_residual_index = 0;
  double best_heuristic = std::numeric_limits<double>::infinity();
  int best_heuristic_index = 0;

  for (int k = 0;; ++k) {
    // Intermediate iterate; it coincides with x while the momentum is zero.
    const double a = cfg.acceleration && k >= 1 ? std::max(0.0, nesterov_alpha(k)) : 0.0;
    LameField bar = x;
    if (a != 0.0) {
      for (std::size_t q = 0; q < x.lambda.size(); ++q) {
        bar.lambda.values()[q] += a * (x.lambda.values()[q] - previous.lambda.values()[q]);
        bar.mu.values()[q] += a * (x.mu.values()[q] - previous.mu.values()[q]);
      }
      bar = elastic::project(bar, cfg.mu_floor);
    }

    const bool last = k == cfg.max_iter;
    std::optional<StepResult> step;
    double residual = 0.0;
    if (!last && a == 0.0) {
      step = landweber_step(bar, udelta, bc, cfg);
      residual = step->residual;
    } else {
      residual = residual_norm(x, udelta, bc);
    }

    TraceEntry entry{k, residual, 0.0, std::sqrt(static_cast<double>(k)) * residual};
    if (residual < best_residual) {
      best_residual = residual;
      best_residual_index = k;
      best_residual_iterate = x;
    }
    if (k >= 1 && entry.heuristic < best_heuristic) {
      best_heuristic = entry.heuristic;
      best_heuristic_index = k;
      best_heuristic_iterate = x;
    }

    const bool stop_now =
        (cfg.stopping == StopRule::Discrepancy && residual <= cfg.tau * cfg.delta) ||
        (cfg.stopping == StopRule::Manual && k == cfg.manual_k);
    if (stop_now) {
      result.trace.push_back(entry);
      result.params = x;
      result.stop_index = k;
      return result;
    }
    if (last) {
      result.trace.push_back(entry);
      break;
    }
    if (!step) step = landweber_step(bar, udelta, bc, cfg);
    entry.stepsize = step->stepsize;
    result.trace.push_back(entry);
    previous = x;
    x = step->params;
  }

  if (cfg.stopping == StopRule::Heuristic) {
    if (cfg.max_iter == 0) {
      result.params = x;
      result.stop_index = 0;
    } else {
      result.params = best_heuristic_iterate;
      result.stop_index = best_heuristic_index;
    }
    return result;
  }
  result.max_iter_reached = true;
  result.params = best_residual_iterate;
  result.stop_index = best_residual_index;
  return result;
}

std::optional<int> stop_discrepancy(const IterationTrace& trace, double tau, double delta) {
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i].residual <= tau * delta) return static_cast<int>(i);
  }
  return std::nullopt;
}

int stop_heuristic(const IterationTrace& trace) {
  if (trace.empty()) throw Error(ErrorKind::DomainError, "empty iteration trace");
  int best = -1;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i].k < 1) continue;
    const double v = std::sqrt(static_cast<double>(trace[i].k)) * trace[i].residual;
    if (v < best_value) {
      best_value = v;
      best = static_cast<int>(i);
    }
  }
  return best < 0 ? 0 : best;
}

FieldError field_error(const VectorGrid& estimate, const VectorGrid& truth) {
  if (!estimate.same_shape(truth)) throw Error(ErrorKind::ShapeMismatch, "field extents differ");
  double diff[2] = {0, 0}, ref[2] = {0, 0};
  for (std::size_t k = 0; k < truth.values().size(); ++k) {
    const double d = estimate.values()[k] - truth.values()[k];
    diff[k % 2] += d * d;
    ref[k % 2] += truth.values()[k] * truth.values()[k];
  }
  if (ref[0] + ref[1] == 0.0) throw Error(ErrorKind::DomainError, "reference field has zero norm");
  auto ratio = [](double num, double den) {
    if (den == 0.0) {
      if (num == 0.0) return 0.0;
      throw Error(ErrorKind::DomainError, "reference component has zero norm");
    }
    return std::sqrt(num / den);
  };
  return {std::sqrt((diff[0] + diff[1]) / (ref[0] + ref[1])), ratio(diff[0], ref[0]), ratio(diff[1], ref[1])};
}

}  // namespace speckleflow::invert
