#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "gsr/error.hpp"
#include "gsr/fields.hpp"
#include "gsr/plot.hpp"

namespace gsr::cli {

namespace fs = std::filesystem;

namespace {

std::string required(const Settings& s, const std::string& key,
                     const std::string& flag) {
  auto v = s.get(key);
  if (!v || v->empty())
    throw UsageError("missing " + flag + " (config key " + key + ")");
  return *v;
}

TriangularMesh mesh_from(const Settings& s) {
  return load_mesh(required(s, "mesh.path", "--mesh"));
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f.exceptions(std::ios::badbit);
  return f;
}

fs::path output_dir(const Settings& s) {
  const fs::path dir = s.get_string("output.dir", "out");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string());
  return dir;
}

Point2 limiter_center(const TriangularMesh& mesh, double* radius) {
  Point2 c;
  double rho = 0.0;
  if (mesh.has_limiter()) {
    for (const Point2& p : mesh.limiter()) {
      c.r += p.r;
      c.z += p.z;
    }
    c.r /= static_cast<double>(mesh.limiter().size());
    c.z /= static_cast<double>(mesh.limiter().size());
    for (const Point2& p : mesh.limiter())
      rho = std::max(rho, std::hypot(p.r - c.r, p.z - c.z));
  } else {
    const auto& bb = mesh.bounds();
    c = {0.5 * (bb.r_min + bb.r_max), 0.5 * (bb.z_min + bb.z_max)};
    rho = 0.4 * std::min(bb.r_max - bb.r_min, bb.z_max - bb.z_min);
  }
  *radius = rho;
  return c;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void print_cost(std::ostream& out, const CostBreakdown& c) {
  static const char* names[kNumFamilies] = {"J0 probes", "J1 polarimetry",
                                            "J2 interferometry", "J3 pressure",
                                            "J4 MSE"};
  out << std::scientific << std::setprecision(6);
  for (int f = 0; f < kNumFamilies; ++f)
    out << "  " << std::left << std::setw(20) << names[f] << c.j[f] << '\n';
  out << "  " << std::setw(20) << "J_eps" << c.j_eps << '\n'
      << "  " << std::setw(20) << "total" << c.total << '\n'
      << "  " << std::setw(20) << "objective" << c.objective << '\n';
  out << std::defaultfloat << std::right;
}

// ---------------------------------------------------------------------------

int cmd_gen_mesh(const std::vector<double>& rect, const std::vector<int>& n,
                 const std::vector<double>& limiter, const std::string& path,
                 std::ostream& out) {
  if (rect.size() != 4 || n.size() != 2)
    throw UsageError("gen-mesh needs --rect r0,r1,z0,z1 and --n nr,nz");
  std::vector<Point2> lim;
  if (!limiter.empty()) {
    if (limiter.size() != 4)
      throw UsageError("--limiter takes r,z,radius,points");
    lim = circle_polyline({limiter[0], limiter[1]}, limiter[2],
                          static_cast<int>(limiter[3]));
  }
  const TriangularMesh mesh =
      rectangle_mesh(rect[0], rect[1], rect[2], rect[3], n[0], n[1], lim);
  save_mesh(path, mesh);
  out << "wrote " << path << ": " << mesh.num_nodes() << " nodes, "
      << mesh.num_triangles() << " triangles\n";
  return kOk;
}

int cmd_forward(const Settings& s, std::ostream& out) {
  const TriangularMesh mesh = mesh_from(s);
  const StiffnessSystem system(mesh);
  const ReducedBasis basis = basis_from(s);
  const Eigen::VectorXd u = profile_coefficients_from(s, basis);
  const ExternalFlux ext = external_flux_from(s);
  Eigen::VectorXd h(static_cast<Eigen::Index>(mesh.boundary().size()));
  for (std::size_t i = 0; i < mesh.boundary().size(); ++i)
    h[static_cast<Eigen::Index>(i)] = ext(mesh.node(mesh.boundary()[i]));

  const ForwardOptions opts = forward_options_from(s);
  std::optional<FluxMap> psi0;
  if (auto warm = s.get("input.warm"))
    psi0 = load_result(*warm, mesh, opts.flux).psi;
  const ForwardResult fw = solve_forward(system, basis, u, h, psi0, opts);

  ReconstructionResult r;
  r.basis_kind = basis.kind_name();
  r.m = basis.size();
  r.u = u;
  r.psi = fw.psi;
  r.state = fw.state;
  r.iterations = fw.iterations;
  r.converged = fw.converged;
  r.f0 = s.get_double("profiles.f0", 1.0);
  if (fw.state) r.plasma_current = plasma_current(mesh, *fw.state, basis, u);
  write_outputs(output_dir(s), mesh, basis, r);

  out << "forward: " << (fw.converged ? "converged" : "NOT converged")
      << " after " << fw.iterations << " iterations (change "
      << fw.change << ")\n";
  if (fw.state)
    out << "  psi_axis " << fw.state->psi_axis << " at (" << fw.state->axis.r
        << ", " << fw.state->axis.z << "), psi_b " << fw.state->psi_b << " ("
        << to_string(fw.state->boundary_kind) << "), plasma current "
        << r.plasma_current << " A\n";
  return fw.converged ? kOk : kNonConvergence;
}

int cmd_twin(const Settings& s, std::ostream& out) {
  const TriangularMesh mesh = mesh_from(s);
  const StiffnessSystem system(mesh);
  const auto seed = static_cast<std::uint64_t>(s.get_double("twin.seed", 0));
  const TwinData twin = synthesize_twin(system, s, seed);
  const ReducedBasis basis = basis_from(s);

  const fs::path dir = output_dir(s);
  save_measurements(dir / "measurements.json", twin.noisy);
  ReconstructionResult truth;
  truth.basis_kind = basis.kind_name();
  truth.m = basis.size();
  truth.u = twin.u;
  truth.psi = twin.truth.psi;
  truth.state = twin.truth.state;
  truth.iterations = twin.truth.iterations;
  truth.converged = twin.truth.converged;
  truth.f0 = twin.noisy.f0;
  if (truth.state)
    truth.plasma_current = plasma_current(mesh, *truth.state, basis, twin.u);
  save_result(dir / "truth.json", truth);

  out << "twin: forward converged in " << twin.truth.iterations
      << " iterations; " << twin.noisy.flux_loops.size() << " loops, "
      << twin.noisy.probes.size() << " probes, " << twin.noisy.chords.size()
      << " chords, " << twin.noisy.pressure.size() << " pressure samples, "
      << twin.noisy.mse.size() << " MSE points; noise "
      << s.get_double("twin.noise", 0.0) << ", seed " << seed << '\n'
      << "  plasma current " << truth.plasma_current << " A\n";
  return kOk;
}

int cmd_reconstruct(const Settings& s, std::ostream& out) {
  const TriangularMesh mesh = mesh_from(s);
  const StiffnessSystem system(mesh);
  const MeasurementSet meas =
      load_measurements(required(s, "input.measurements", "--measurements"));
  const ReconstructionConfig config = reconstruction_config_from(s);
  std::optional<ReconstructionResult> warm;
  if (auto w = s.get("input.warm")) warm = load_result(*w, mesh, config.flux);
  const ReconstructionResult r =
      reconstruct(system, meas, config, warm ? &*warm : nullptr);
  const ReducedBasis basis = ReducedBasis::make(config.basis_kind, config.m);
  write_outputs(output_dir(s), mesh, basis, r);

  out << "reconstruct: " << (r.converged ? "converged" : "NOT converged")
      << " after " << r.iterations << " outer iterations\n";
  if (r.state)
    out << "  psi_axis " << r.state->psi_axis << ", psi_b " << r.state->psi_b
        << " (" << to_string(r.state->boundary_kind) << "), plasma current "
        << r.plasma_current << " A\n";
  out << "cost breakdown:\n";
  print_cost(out, r.cost);
  return r.converged ? kOk : kNonConvergence;
}

int cmd_bench(const Settings& s, std::ostream& out) {
  using Clock = std::chrono::steady_clock;
  const TriangularMesh mesh = mesh_from(s);
  const auto t0 = Clock::now();
  const StiffnessSystem system(mesh);
  const double t_setup = std::chrono::duration<double>(Clock::now() - t0).count();

  const auto seed = static_cast<std::uint64_t>(s.get_double("twin.seed", 0));
  MeasurementSet base;
  if (auto path = s.get("input.measurements"))
    base = load_measurements(*path);
  else
    base = synthesize_twin(system, s, seed).noisy;
  const ReconstructionConfig config = reconstruction_config_from(s);
  const int frames = s.get_int("bench.frames", 100);
  const double perturbation = s.get_double("bench.perturbation", 1e-3);
  if (frames < 1) throw ValidationError("bench.frames must be >= 1");

  ReconstructionResult prev = reconstruct(system, base, config);
  std::vector<double> phase[6];
  std::vector<double> iterations;
  int nonconverged = 0;
  for (int f = 1; f <= frames; ++f) {
    const MeasurementSet meas = add_noise(base, perturbation, seed + f);
    ReconstructionResult r = reconstruct(system, meas, config, &prev);
    for (const IterationRecord& it : r.log) {
      phase[0].push_back(it.t_flux);
      phase[1].push_back(it.t_assembly);
      phase[2].push_back(it.t_linearize);
      phase[3].push_back(it.t_normal);
      phase[4].push_back(it.t_picard);
      phase[5].push_back(it.t_total());
    }
    iterations.push_back(r.iterations);
    if (!r.converged) ++nonconverged;
    prev = std::move(r);
  }

  static const char* names[6] = {"flux analysis", "D assembly", "linearization",
                                 "normal solve", "Picard solve",
                                 "outer iteration"};
  out << "bench: " << mesh.num_nodes() << " nodes, m = " << config.m << ", "
      << frames << " warm-started frames\n";
  out << "  stiffness assembly + factorization (once): " << std::fixed
      << std::setprecision(3) << t_setup * 1e3 << " ms\n";
  out << "  " << std::left << std::setw(18) << "phase" << std::right
      << std::setw(14) << "median [ms]" << std::setw(14) << "p99 [ms]" << '\n';
  for (int k = 0; k < 6; ++k)
    out << "  " << std::left << std::setw(18) << names[k] << std::right
        << std::setw(14) << percentile(phase[k], 0.5) * 1e3 << std::setw(14)
        << percentile(phase[k], 0.99) * 1e3 << '\n';
  out << std::defaultfloat << "  median outer iterations per frame: "
      << percentile(iterations, 0.5) << " (max "
      << *std::max_element(iterations.begin(), iterations.end())
      << "), non-converged frames: " << nonconverged << '\n';
  return nonconverged ? kNonConvergence : kOk;
}

}  // namespace

// ---------------------------------------------------------------------------

MeasurementSet default_diagnostics(const TriangularMesh& mesh, const Settings& s) {
  MeasurementSet m;
  const int n_loops = s.get_int("twin.loops", 32);
  const int n_probes = s.get_int("twin.probes", 32);
  const int n_pressure = s.get_int("twin.pressure", 10);
  const int n_mse = s.get_int("twin.mse", 4);
  m.f0 = s.get_double("profiles.f0", 1.0);

  const auto& b = mesh.boundary();
  const auto& arc = mesh.boundary_arclength();
  const double perimeter = mesh.perimeter();
  const int nb = static_cast<int>(b.size());
  auto nearest_boundary_index = [&](double target) {
    int best = 0;
    double best_d = perimeter;
    for (int i = 0; i < nb; ++i) {
      const double d = std::abs(arc[i] - target);
      const double dd = std::min(d, perimeter - d);
      if (dd < best_d) {
        best_d = dd;
        best = i;
      }
    }
    return best;
  };
  std::vector<int> used;
  for (int k = 0; k < n_loops; ++k) {
    const int i = nearest_boundary_index(perimeter * k / n_loops);
    if (std::find(used.begin(), used.end(), i) != used.end()) continue;
    used.push_back(i);
    m.flux_loops.push_back({mesh.node(b[i]), 0.0});
  }
  for (int k = 0; k < n_probes; ++k) {
    const int i = nearest_boundary_index(perimeter * (k + 0.5) / n_probes);
    const Point2& a = mesh.node(b[i]);
    const Point2& c = mesh.node(b[(i + 1) % nb]);
    Probe p;
    p.position = {0.5 * (a.r + c.r), 0.5 * (a.z + c.z)};
    p.tangent = Eigen::Vector2d(c.r - a.r, c.z - a.z).normalized();
    m.probes.push_back(p);
  }

  double rho = 0.0;
  const Point2 c = limiter_center(mesh, &rho);
  const auto& bb = mesh.bounds();
  for (double dr : {-0.5, 0.0, 0.5}) {
    Chord ch;
    ch.start = {c.r + dr * rho, bb.z_min};
    ch.end = {c.r + dr * rho, bb.z_max};
    ch.polarimetry = 0.0;
    ch.interferometry = 0.0;
    m.chords.push_back(ch);
  }
  for (double dz : {-0.35, 0.35}) {
    Chord ch;
    ch.start = {bb.r_min, c.z + dz * rho};
    ch.end = {bb.r_max, c.z + dz * rho};
    ch.polarimetry = 0.0;
    ch.interferometry = 0.0;
    m.chords.push_back(ch);
  }
  // outboard only, so that the samples see distinct normalized fluxes
  for (int k = 0; k < n_pressure; ++k) {
    const double t = n_pressure > 1 ? 0.04 + 0.81 * k / (n_pressure - 1) : 0.4;
    m.pressure.push_back({c.r + t * rho, 0.0, 1.0});
  }
  if (n_pressure > 0) {
    m.pressure_r_min = c.r;
    m.pressure_r_max = c.r + rho;
  }
  for (int k = 0; k < n_mse; ++k) {
    const double t = n_mse > 1 ? -0.6 + 1.2 * k / (n_mse - 1) : 0.3;
    MsePoint p;
    p.position = {c.r + t * rho, 0.0};
    p.coefficients = {0, 1, 0, 0, 0, 1};
    m.mse.push_back(p);
  }
  return m;
}

MeasurementSet add_noise(const MeasurementSet& clean, double sigma,
                         std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ValidationError("noise level must be >= 0");
  MeasurementSet m = clean;
  if (sigma == 0.0) return m;
  const auto rms = family_rms(clean);
  double loop_rms = 0.0;
  for (const FluxLoop& l : clean.flux_loops) loop_rms += l.value * l.value;
  loop_rms = clean.flux_loops.empty()
                 ? 0.0
                 : std::sqrt(loop_rms / static_cast<double>(clean.flux_loops.size()));
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto noise = [&](double scale) { return sigma * scale * normal(gen); };
  for (FluxLoop& l : m.flux_loops) l.value += noise(loop_rms);
  for (Probe& p : m.probes) p.value += noise(rms[static_cast<int>(Family::Probe)]);
  for (Chord& c : m.chords) {
    if (c.polarimetry)
      *c.polarimetry += noise(rms[static_cast<int>(Family::Polarimetry)]);
    if (c.interferometry)
      *c.interferometry += noise(rms[static_cast<int>(Family::Interferometry)]);
  }
  for (PressureSample& p : m.pressure)
    p.value += noise(rms[static_cast<int>(Family::Pressure)]);
  for (MsePoint& p : m.mse) p.gamma += noise(rms[static_cast<int>(Family::Mse)]);
  return m;
}

TwinData synthesize_twin(const StiffnessSystem& system, const Settings& s,
                         std::uint64_t seed) {
  const TriangularMesh& mesh = system.mesh();
  const ReducedBasis basis = basis_from(s);
  TwinData t;
  t.u = profile_coefficients_from(s, basis);

  MeasurementSet geometry;
  if (auto path = s.get("twin.geometry")) {
    geometry = load_measurements(*path);
    if (s.has("profiles.f0")) geometry.f0 = s.get_double("profiles.f0", 1.0);
  } else {
    geometry = default_diagnostics(mesh, s);
  }
  const ExternalFlux ext = external_flux_from(s);
  for (FluxLoop& l : geometry.flux_loops) l.value = ext(l.position);
  geometry.validate(mesh);
  t.h = boundary_condition(mesh, geometry.flux_loops);

  t.truth = solve_forward(system, basis, t.u, t.h, std::nullopt,
                          forward_options_from(s));
  if (!t.truth.converged)
    throw NonConvergenceError("twin forward solve did not converge in " +
                              std::to_string(t.truth.iterations) + " iterations");
  t.clean = synthesize_measurements(mesh, basis, t.truth.psi, t.truth.state, t.u,
                                    geometry);
  t.noisy = add_noise(t.clean, s.get_double("twin.noise", 0.0), seed);
  return t;
}

void write_outputs(const fs::path& dir, const TriangularMesh& mesh,
                   const ReducedBasis& basis, const ReconstructionResult& r) {
  const ProfileCoefficients u(r.u, basis.size());
  {
    auto f = open_output(dir / "psi.csv");
    write_psi_csv(f, mesh, r.psi);
  }
  {
    auto f = open_output(dir / "profiles.csv");
    if (r.state)
      write_profiles_csv(f, basis, u, r.state->psi_axis, r.state->psi_b, r.f0);
    else
      write_profiles_csv(f, basis, u, 0.0, 0.0, r.f0);
  }
  {
    auto f = open_output(dir / "fields.csv");
    write_field_grid_csv(f, mesh, r.psi, r.state, basis, r.u, r.f0);
  }
  {
    auto f = open_output(dir / "flux.svg");
    write_flux_svg(f, mesh, r.psi, r.state);
  }
  {
    auto f = open_output(dir / "result.json");
    write_result(f, r);
  }
}

// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args_in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Equilibrium reconstruction toolkit", "gsrecon"};
  app.require_subcommand(1);

  struct Common {
    std::string mesh, config, out, warm, measurements;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> set;
  };
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--mesh", common.mesh, "Mesh file");
    sub->add_option("--config", common.config, "INI configuration file");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--seed", common.seed, "Random seed");
    sub->add_option("--warm", common.warm, "Previous result.json to start from");
    sub->add_option("--measurements", common.measurements, "Measurement file");
    sub->add_option("--set", common.set, "Override: section.key=value");
  };
  CLI::App* forward = app.add_subcommand("forward", "Forward free-boundary solve");
  CLI::App* twin = app.add_subcommand("twin", "Synthesize twin-experiment data");
  CLI::App* recon = app.add_subcommand("reconstruct", "Reconstruct from measurements");
  CLI::App* bench = app.add_subcommand("bench", "Time warm-started reconstructions");
  for (CLI::App* sub : {forward, twin, recon, bench}) add_common(sub);

  CLI::App* gen = app.add_subcommand("gen-mesh", "Write a structured rectangle mesh");
  std::vector<double> rect, limiter;
  std::vector<int> n;
  std::string gen_out;
  gen->add_option("--rect", rect, "r0,r1,z0,z1")->delimiter(',')->required();
  gen->add_option("--n", n, "nr,nz")->delimiter(',')->required();
  gen->add_option("--limiter", limiter, "r,z,radius,points")->delimiter(',');
  gen->add_option("--out", gen_out, "Mesh file")->required();

  std::vector<std::string> args(args_in.rbegin(), args_in.rend());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_mesh(rect, n, limiter, gen_out, out);

    Settings s;
    if (!common.config.empty()) s = Settings::load(common.config);
    for (const std::string& a : common.set) s.apply_override(a);
    if (!common.mesh.empty()) s.set("mesh.path", common.mesh);
    if (!common.out.empty()) s.set("output.dir", common.out);
    if (common.seed) s.set("twin.seed", std::to_string(*common.seed));
    if (!common.warm.empty()) s.set("input.warm", common.warm);
    if (!common.measurements.empty())
      s.set("input.measurements", common.measurements);

    if (forward->parsed()) return cmd_forward(s, out);
    if (twin->parsed()) return cmd_twin(s, out);
    if (recon->parsed()) return cmd_reconstruct(s, out);
    if (bench->parsed()) return cmd_bench(s, out);
    return kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const NonConvergenceError& e) {
    err << "non-convergence: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const DegeneratePlasmaError& e) {
    err << "degenerate plasma: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const SingularSystemError& e) {
    err << "singular system: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const Error& e) {
    // parse, validation and location errors
    err << "invalid input: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
}

}  // namespace gsr::cli
