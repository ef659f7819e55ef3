#include "speckleflow/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>

#include "speckleflow/elastic.hpp"
#include "speckleflow/error.hpp"
#include "speckleflow/flow.hpp"
#include "speckleflow/gridcore.hpp"
#include "speckleflow/invert.hpp"
#include "speckleflow/io.hpp"
#include "speckleflow/phantom.hpp"
#include "speckleflow/speckle.hpp"

namespace speckleflow::cli {
namespace {

namespace fs = std::filesystem;

io::KeyValues optional_config(const std::string& path) {
  return path.empty() ? io::KeyValues{} : io::read_key_values(path);
}

std::ofstream open_text(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "' for writing");
  return out;
}

void write_grid(const fs::path& path, const ScalarGrid& g) { io::write_f64grid(path, io::to_f64grid(g)); }
void write_grid(const fs::path& path, const VectorGrid& g) { io::write_f64grid(path, io::to_f64grid(g)); }
void write_grid(const fs::path& path, const Volume& g) { io::write_f64grid(path, io::to_f64grid(g)); }

void synth(const std::string& spec_path, const fs::path& dir) {
  const phantom::PhantomSpec spec = phantom::parse_phantom_spec(io::read_key_values(spec_path));
  fs::create_directories(dir);
  switch (spec.kind) {
    case phantom::Kind::MovingSquares: {
      const auto p = phantom::make_moving_squares(spec);
      write_grid(dir / "i1.f64grid", p.i1);
      write_grid(dir / "i2.f64grid", p.i2);
      write_grid(dir / "flow_true.f64grid", p.flow);
      io::write_samples_csv(dir / "samples.csv", p.samples);
      break;
    }
    case phantom::Kind::Inclusion: {
      const auto p = phantom::make_inclusion_phantom(spec);
      io::write_f64grid(dir / "lame.f64grid", elastic::to_f64grid(p.lame));
      auto bc = open_text(dir / "bc.txt");
      elastic::write_boundary_conditions(bc, p.bc);
      write_grid(dir / "u_true.f64grid", p.u_true);
      write_grid(dir / "i1.f64grid", p.i1);
      write_grid(dir / "i2.f64grid", p.i2);
      write_grid(dir / "mask.f64grid", p.mask);
      io::write_samples_csv(dir / "samples.csv", p.samples);
      break;
    }
    case phantom::Kind::Tracking: {
      const auto p = phantom::make_tracking_phantom(spec);
      write_grid(dir / "v1.f64grid", p.v1);
      write_grid(dir / "v2.f64grid", p.v2);
      io::write_samples_csv(dir / "samples_true.csv", p.truth);
      break;
    }
  }
}

void track(const std::string& a, const std::string& b, const std::string& config, const fs::path& out) {
  const auto cfg = speckle::parse_tracking_config(optional_config(config));
  const Volume v1 = io::to_volume(io::read_f64grid(fs::path(a)));
  const Volume v2 = io::to_volume(io::read_f64grid(fs::path(b)));
  io::write_samples_csv(out, speckle::run_tracking(v1, v2, cfg.criteria, cfg.options));
}

void flow_command(const std::string& i1, const std::string& i2, const std::string& samples,
                  const std::string& config, const fs::path& out) {
  const flow::FlowParams p = flow::parse_flow_params(optional_config(config));
  const ScalarGrid a = io::to_scalar_grid(io::read_f64grid(fs::path(i1)));
  const ScalarGrid b = io::to_scalar_grid(io::read_f64grid(fs::path(i2)));
  const SampleList s = samples.empty() ? SampleList{} : io::read_samples_csv(fs::path(samples));
  write_grid(out, flow::multiscale_flow(a, b, s, p));
}

void forward(const std::string& lame, const std::string& bc, const fs::path& out) {
  const auto p = elastic::lame_from_f64grid(io::read_f64grid(fs::path(lame)));
  write_grid(out, elastic::forward_solve(p, elastic::read_boundary_conditions(bc)));
}

void invert_command(const std::string& data, const std::string& bc, const std::string& config,
                    const fs::path& out_dir, const std::string& trace) {
  const VectorGrid u = io::to_vector_grid(io::read_f64grid(fs::path(data)));
  const auto cfg = invert::parse_inversion_config(optional_config(config), u.nx() - 1, u.ny() - 1);
  const auto result = invert::nesterov_iterate(cfg, u, elastic::read_boundary_conditions(bc));
  fs::create_directories(out_dir);
  io::write_f64grid(out_dir / "lame.f64grid", elastic::to_f64grid(result.params));
  write_grid(out_dir / "young.f64grid", elastic::young_modulus(result.params));
  if (!trace.empty()) {
    auto t = open_text(trace);
    invert::write_trace_csv(t, result.trace);
  }
}

void eval(const std::string& est, const std::string& truth, std::ostream& out) {
  const auto e = invert::field_error(io::to_vector_grid(io::read_f64grid(fs::path(est))),
                                     io::to_vector_grid(io::read_f64grid(fs::path(truth))));
  out << io::format_double(e.total) << ',' << io::format_double(e.x) << ',' << io::format_double(e.y) << '\n';
}

void render(const std::string& in, const fs::path& out, int slice, int stride) {
  const io::F64Grid g = io::read_f64grid(fs::path(in));
  if (g.ncomp > 2) throw Error(ErrorKind::ShapeMismatch, "render expects one or two components");
  if (slice < 0 || slice >= g.nz) throw Error(ErrorKind::DomainError, "slice index out of range");
  if (stride < 1) throw Error(ErrorKind::DomainError, "stride must be positive");
  const std::size_t plane = static_cast<std::size_t>(g.nx) * g.ny;
  const std::size_t base = static_cast<std::size_t>(slice) * plane * g.ncomp;
  std::vector<double> mag(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    double s = 0.0;
    for (int c = 0; c < g.ncomp; ++c) s += g.data[base + p * g.ncomp + c] * g.data[base + p * g.ncomp + c];
    mag[p] = g.ncomp == 1 ? g.data[base + p] : std::sqrt(s);
  }
  const auto [lo, hi] = std::minmax_element(mag.begin(), mag.end());
  const double range = *hi - *lo;
  io::Pgm img{g.nx, g.ny, std::vector<unsigned char>(plane, 0)};
  if (range > 0) {
    for (std::size_t p = 0; p < plane; ++p) {
      img.pixels[p] = static_cast<unsigned char>(std::lround(255.0 * (mag[p] - *lo) / range));
    }
  }
  io::write_pgm(out, img);
  if (g.ncomp == 2) {
    fs::path quiver = out;
    quiver.replace_extension(".quiver.csv");
    auto q = open_text(quiver);
    q << "x,y,ux,uy\n";
    for (int j = 0; j < g.ny; j += stride) {
      for (int i = 0; i < g.nx; i += stride) {
        const std::size_t p = static_cast<std::size_t>(j) * g.nx + i;
        q << i << ',' << j << ',' << io::format_double(g.data[base + 2 * p]) << ','
          << io::format_double(g.data[base + 2 * p + 1]) << '\n';
      }
    }
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speckle-augmented optical flow and elastography", "speckleflow"};
  app.require_subcommand(1);
  std::function<void()> action;

  std::string spec, out_path, a, b, config, samples, lame, bc, data, trace, est, truth, in;
  int slice = 0, stride = 8;

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic phantom");
  synth_cmd->add_option("--spec", spec, "Phantom spec (key = value)")->required();
  synth_cmd->add_option("--out", out_path, "Output directory")->required();
  synth_cmd->callback([&] { action = [&] { synth(spec, out_path); }; });

  auto* track_cmd = app.add_subcommand("track", "Detect and match bubbles between two volumes");
  track_cmd->add_option("--a", a, "First volume (F64GRID)")->required();
  track_cmd->add_option("--b", b, "Second volume (F64GRID)")->required();
  track_cmd->add_option("--config", config, "Tracking config");
  track_cmd->add_option("--out", out_path, "Samples CSV")->required();
  track_cmd->callback([&] { action = [&] { track(a, b, config, out_path); }; });

  auto* flow_cmd = app.add_subcommand("flow", "Estimate a displacement field");
  flow_cmd->add_option("--i1", a, "First image (F64GRID)")->required();
  flow_cmd->add_option("--i2", b, "Second image (F64GRID)")->required();
  flow_cmd->add_option("--samples", samples, "Bubble samples CSV");
  flow_cmd->add_option("--config", config, "Flow config");
  flow_cmd->add_option("--out", out_path, "Displacement field (F64GRID)")->required();
  flow_cmd->callback([&] { action = [&] { flow_command(a, b, samples, config, out_path); }; });

  auto* forward_cmd = app.add_subcommand("forward", "Solve the elasticity forward problem");
  forward_cmd->add_option("--lame", lame, "Lame field (F64GRID, 2 components per cell)")->required();
  forward_cmd->add_option("--bc", bc, "Boundary conditions")->required();
  forward_cmd->add_option("--out", out_path, "Displacement field (F64GRID)")->required();
  forward_cmd->callback([&] { action = [&] { forward(lame, bc, out_path); }; });

  auto* invert_cmd = app.add_subcommand("invert", "Reconstruct Lame parameters from a displacement field");
  invert_cmd->add_option("--data", data, "Displacement field (F64GRID)")->required();
  invert_cmd->add_option("--bc", bc, "Boundary conditions")->required();
  invert_cmd->add_option("--config", config, "Inversion config");
  invert_cmd->add_option("--out", out_path, "Output directory")->required();
  invert_cmd->add_option("--trace", trace, "Iteration trace CSV");
  invert_cmd->callback([&] { action = [&] { invert_command(data, bc, config, out_path, trace); }; });

  auto* eval_cmd = app.add_subcommand("eval", "Relative errors of a displacement field");
  eval_cmd->add_option("--est", est, "Estimated field")->required();
  eval_cmd->add_option("--truth", truth, "Reference field")->required();
  eval_cmd->callback([&] { action = [&] { eval(est, truth, out); }; });

  auto* render_cmd = app.add_subcommand("render", "Render a field as PGM");
  render_cmd->add_option("--in", in, "Field (F64GRID)")->required();
  render_cmd->add_option("--out", out_path, "PGM image")->required();
  render_cmd->add_option("--slice", slice, "z slice for volumes");
  render_cmd->add_option("--stride", stride, "Quiver sample spacing");
  render_cmd->callback([&] { action = [&] { render(in, out_path, slice, stride); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "speckleflow: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    action();
  } catch (const std::exception& e) {
    err << "speckleflow: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace speckleflow::cli
