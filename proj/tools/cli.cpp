#include "cli.hpp"

#include "fshapes/atlas.hpp"
#include "fshapes/deformation.hpp"
#include "fshapes/errors.hpp"
#include "fshapes/estimation.hpp"
#include "fshapes/fvarifold.hpp"
#include "fshapes/mesh.hpp"
#include "fshapes/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>
#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

namespace fshapes::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  double sigma_e = 1.0;
  double sigma_t = 1.0;
  double sigma_f = 1.0;
  std::vector<double> sigma_v{1.0};
  double sigma_reg = 0.0;  // 0: use sigma_e
  double gamma_v0 = 1.0;
  double gamma_f0 = 0.1;
  double gamma_v = 1.0;
  double gamma_f = 0.1;
  double gamma_w = 1.0;
  int nsteps = 10;
  int iters = 100;
  double step = 0.1;
  std::string multiscale;
  int threads = 0;
  bool center = false;
  bool raw = false;
  std::string output = "fshapes_out";
  int frames = 0;

  // Positional arguments and command-specific flags.
  std::string mesh_a, mesh_b;
  std::vector<std::string> subjects;
  std::string momenta, residual, signal_momenta;
  std::string model = "tangential";
  std::string shape;
  long long points = 162;
  unsigned long long seed = 0;
  double noise = 0.0;
};

void add_kernel_flags(CLI::App& c, Options& o) {
  c.add_option("--sigma-e", o.sigma_e, "Spatial width of the fvarifold kernel")->capture_default_str();
  c.add_option("--sigma-t", o.sigma_t, "Width of the tangent-space kernel (dimensionless)")->capture_default_str();
  c.add_option("--sigma-f", o.sigma_f, "Signal width of the fvarifold kernel")->capture_default_str();
}

void add_deformation_flags(CLI::App& c, Options& o) {
  c.add_option("--sigma-v", o.sigma_v, "Deformation kernel scales, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  c.add_option("--nsteps", o.nsteps, "RK4 time steps of each geodesic")->capture_default_str();
}

void add_weight_flags(CLI::App& c, Options& o, bool hypertemplate) {
  if (hypertemplate) {
    c.add_option("--gamma-v0", o.gamma_v0, "Weight of the hypertemplate-to-template deformation")
        ->capture_default_str();
  }
  c.add_option("--gamma-f0", o.gamma_f0, "Weight of the template signal norm")->capture_default_str();
  c.add_option("--gamma-v", o.gamma_v, "Weight of the template-to-subject deformations")->capture_default_str();
  c.add_option("--gamma-f", o.gamma_f, "Weight of the residual signal norms")->capture_default_str();
  c.add_option("--gamma-w", o.gamma_w, "Weight of the data attachment")->capture_default_str();
}

void add_optimizer_flags(CLI::App& c, Options& o) {
  c.add_option("--iters", o.iters, "Maximum accepted descent steps")->capture_default_str();
  c.add_option("--step", o.step, "Initial step size of every variable block")->capture_default_str();
  c.add_option("--multiscale", o.multiscale,
               "Kernel schedule 'sigma_e,sigma_f@iters;...' (overrides --sigma-e/--sigma-f/--iters)");
  c.add_flag("--raw", o.raw, "Disable energy normalization and gradient preconditioning");
  c.add_flag("--center", o.center, "Translate every input mesh to a zero vertex centroid");
}

void build(CLI::App& app, Options& o) {
  app.description("Functional shape matching and atlas estimation.");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);
  app.add_option("--threads", o.threads, "Worker threads (0: all available cores)")->capture_default_str();
  app.add_option("-o,--output", o.output, "Output directory")->capture_default_str();

  auto* dist = app.add_subcommand("dist", "Print the squared fvarifold distance between two meshes");
  dist->add_option("mesh_a", o.mesh_a, "First mesh")->required();
  dist->add_option("mesh_b", o.mesh_b, "Second mesh")->required();
  add_kernel_flags(*dist, o);

  auto* match = app.add_subcommand("match", "Register a source onto a target (momenta and signal residual)");
  match->add_option("source", o.mesh_a, "Source mesh (fixed template)")->required();
  match->add_option("target", o.mesh_b, "Target mesh")->required();
  add_kernel_flags(*match, o);
  add_deformation_flags(*match, o);
  match->add_option("--gamma-v", o.gamma_v, "Weight of the deformation")->capture_default_str();
  match->add_option("--gamma-f", o.gamma_f, "Weight of the residual signal norm")->capture_default_str();
  match->add_option("--gamma-w", o.gamma_w, "Weight of the data attachment")->capture_default_str();
  add_optimizer_flags(*match, o);
  match->add_option("--frames", o.frames, "Export the trajectory at this many time intervals (0: none)")
      ->capture_default_str();

  auto* ht = app.add_subcommand("atlas-ht", "Estimate a template constrained by a hypertemplate");
  ht->add_option("hypertemplate", o.mesh_a, "Hypertemplate mesh (its signal is ignored)")->required();
  ht->add_option("subjects", o.subjects, "Subject meshes")->required();
  add_kernel_flags(*ht, o);
  add_deformation_flags(*ht, o);
  add_weight_flags(*ht, o, true);
  add_optimizer_flags(*ht, o);

  auto* fr = app.add_subcommand("atlas-free", "Estimate a template with free vertex positions");
  fr->add_option("template", o.mesh_a, "Initial template mesh")->required();
  fr->add_option("subjects", o.subjects, "Subject meshes")->required();
  add_kernel_flags(*fr, o);
  add_deformation_flags(*fr, o);
  add_weight_flags(*fr, o, false);
  fr->add_option("--sigma-reg", o.sigma_reg, "Width of the template gradient smoothing (0: sigma-e)")
      ->capture_default_str();
  add_optimizer_flags(*fr, o);

  auto* shoot = app.add_subcommand("shoot", "Integrate a geodesic from a mesh and initial momenta");
  shoot->add_option("mesh", o.mesh_a, "Initial mesh")->required();
  shoot->add_option("momenta", o.momenta, "Momenta file, one covector per vertex")->required();
  shoot->add_option("--model", o.model, "tangential or metamorphosis")
      ->check(CLI::IsMember({"tangential", "metamorphosis"}))
      ->capture_default_str();
  shoot->add_option("--residual", o.residual, "Tangential model: total signal change, one value per vertex");
  shoot->add_option("--signal-momenta", o.signal_momenta, "Metamorphosis model: signal momenta, one per vertex");
  shoot->add_option("--gamma-v", o.gamma_v, "Deformation kernel scaling")->capture_default_str();
  shoot->add_option("--gamma-f", o.gamma_f, "Signal metric scaling (metamorphosis)")->capture_default_str();
  add_deformation_flags(*shoot, o);
  shoot->add_option("--frames", o.frames, "Exported time intervals (0: every step)")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic functional shape");
  synth->add_option("shape", o.shape, "sphere, ellipsoid, square, holed-square or overlap-pair")
      ->check(CLI::IsMember({"sphere", "ellipsoid", "square", "holed-square", "overlap-pair"}))
      ->required();
  synth->add_option("-P,--points", o.points, "Approximate vertex count")->capture_default_str();
  synth->add_option("--seed", o.seed, "Seed of the signal noise")->capture_default_str();
  synth->add_option("--noise", o.noise, "Standard deviation of the signal noise")->capture_default_str();
}

std::string sha256(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  const std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("cannot hash " + path.string());
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

struct Manifest {
  json j;

  Manifest(const std::string& command, const Options& o) {
    j["command"] = command;
    j["version"] = kVersion;
    j["threads"] = omp_get_max_threads();
    j["inputs"] = json::array();
    j["output"] = o.output;
  }

  void input(const std::string& path) { j["inputs"].push_back({{"path", path}, {"sha256", sha256(path)}}); }

  void write(const fs::path& dir) const {
    std::ofstream os(dir / "manifest.json");
    if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
    os << j.dump(2) << '\n';
  }
};

void record_kernel(Manifest& m, const Options& o) {
  m.j["sigma_e"] = o.sigma_e;
  m.j["sigma_t"] = o.sigma_t;
  m.j["sigma_f"] = o.sigma_f;
}

void record_deformation(Manifest& m, const Options& o) {
  m.j["sigma_v"] = o.sigma_v;
  m.j["nsteps"] = o.nsteps;
}

fs::path output_dir(const Options& o) {
  std::error_code ec;
  fs::create_directories(o.output, ec);
  if (ec) throw IoError("cannot create output directory " + o.output + ": " + ec.message());
  return o.output;
}

FShapeMesh load(const std::string& path, bool center) {
  if (!fs::exists(path)) throw IoError("file not found: " + path);
  FShapeMesh m = load_fshape(path);
  if (center) m.vertices.rowwise() -= m.vertices.colwise().mean();
  return m;
}

KernelConfig kernel(const Options& o) { return {o.sigma_e, o.sigma_t, o.sigma_f}; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_same_dims(const FShapeMesh& a, const FShapeMesh& b, const std::string& what) {
  if (a.ambient_dim() != b.ambient_dim() || a.cell_dim() != b.cell_dim()) {
    throw ValidationError(what + ": dimension mismatch (d=" + std::to_string(a.cell_dim()) + ", n=" +
                          std::to_string(a.ambient_dim()) + ") vs (d=" + std::to_string(b.cell_dim()) +
                          ", n=" + std::to_string(b.ambient_dim()) + ")");
  }
}

EstimationOptions estimation_options(const Options& o) {
  EstimationOptions e;
  e.step = o.step;
  e.iters = o.iters;
  e.normalize = !o.raw;
  if (!o.multiscale.empty()) e.schedule = parse_schedule(o.multiscale, kernel(o));
  return e;
}

void record_run(Manifest& m, const Options& o, const EstimationResult& r) {
  m.j["iters"] = o.iters;
  m.j["step"] = o.step;
  m.j["multiscale"] = o.multiscale;
  m.j["normalized"] = !o.raw;
  m.j["R_e"] = r.constants.R_e;
  m.j["R_f"] = r.constants.R_f;
  json stages = json::array();
  for (const auto& log : r.logs) {
    stages.push_back({{"iterations", log.iterations},
                      {"stop_reason", log.stop_reason},
                      {"initial_total", log.records.front().energy.total},
                      {"final_total", log.records.back().energy.total}});
  }
  m.j["stages"] = stages;
}

void write_logs(const fs::path& dir, const std::vector<RunLog>& logs) {
  if (logs.size() == 1) {
    logs.front().write_csv(dir / "runlog.csv");
    return;
  }
  for (std::size_t k = 0; k < logs.size(); ++k) logs[k].write_csv(dir / ("runlog_stage" + std::to_string(k + 1) + ".csv"));
}

/// Frames k = 0..frames of a trajectory sampled on nsteps intervals.
void write_frames(const fs::path& dir, const ShootState& s, const Cells& cells, int frames) {
  const int nsteps = s.nsteps();
  if (frames == 0) frames = nsteps;
  if (frames < 0 || nsteps % frames != 0) {
    throw ValidationError("--frames must divide --nsteps (" + std::to_string(nsteps) + ")");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (int k = 0; k <= frames; ++k) {
    const auto i = static_cast<std::size_t>(k * (nsteps / frames));
    FShapeMesh m{s.positions[i], s.signals[i], cells};
    save_fshape(m, dir / ("frame_" + std::to_string(k) + ".fshape"), MeshFormat::NativeAscii);
    save_matrix(s.momenta[i], dir / ("momenta_" + std::to_string(k) + ".txt"));
  }
}

int cmd_dist(const Options& o) {
  const FShapeMesh a = load(o.mesh_a, false);
  const FShapeMesh b = load(o.mesh_b, false);
  check_same_dims(a, b, "dist");
  const AttachmentValue v = squared_distance(to_diracs(a), to_diracs(b), kernel(o));
  std::cout << fmt(v.value) << '\n';
  Manifest m("dist", o);
  m.input(o.mesh_a);
  m.input(o.mesh_b);
  record_kernel(m, o);
  m.j["squared_distance"] = v.value;
  m.write(output_dir(o));
  return Ok;
}

AtlasParams atlas_params(const Options& o) {
  AtlasParams p;
  p.kernel = kernel(o);
  p.deformation = DeformationKernelConfig::from_scales(o.sigma_v);
  p.weights = {o.gamma_v0, o.gamma_f0, o.gamma_v, o.gamma_f, o.gamma_w};
  p.nsteps = o.nsteps;
  return p;
}

void record_weights(Manifest& m, const Options& o, bool hypertemplate) {
  if (hypertemplate) m.j["gamma_v0"] = o.gamma_v0;
  m.j["gamma_f0"] = o.gamma_f0;
  m.j["gamma_v"] = o.gamma_v;
  m.j["gamma_f"] = o.gamma_f;
  m.j["gamma_w"] = o.gamma_w;
}

int cmd_match(const Options& o) {
  const FShapeMesh source = load(o.mesh_a, o.center);
  FShapeMesh target = load(o.mesh_b, o.center);
  check_same_dims(source, target, "match");
  AtlasParams params = atlas_params(o);
  params.weights.gamma_V0 = 0.0;
  params.weights.gamma_f0 = 0.0;
  AtlasState state = AtlasState::make(AtlasVariant::Free, source, {std::move(target)});
  state.template_signal = source.signal;
  EstimationOptions eo = estimation_options(o);
  eo.fixed_template = true;
  const EstimationResult r = estimate(std::move(state), params, eo);

  const fs::path dir = output_dir(o);
  const ShootState traj = shoot_tangential(source.vertices, r.state.momenta[0], source.signal, r.state.residuals[0],
                                           params.deformation, 1.0, params.nsteps);
  save_fshape({traj.positions.back(), traj.signals.back(), source.cells}, dir / "deformed.fshape",
              MeshFormat::NativeAscii);
  save_matrix(r.state.momenta[0], dir / "momenta.txt");
  save_matrix(r.state.residuals[0], dir / "residual.txt");
  write_logs(dir, r.logs);
  if (o.frames > 0) write_frames(dir / "trajectory", traj, source.cells, o.frames);

  Manifest m("match", o);
  m.input(o.mesh_a);
  m.input(o.mesh_b);
  record_kernel(m, o);
  record_deformation(m, o);
  m.j["gamma_v"] = o.gamma_v;
  m.j["gamma_f"] = o.gamma_f;
  m.j["gamma_w"] = o.gamma_w;
  m.j["center"] = o.center;
  record_run(m, o, r);
  m.write(dir);
  std::cout << "final energy " << fmt(r.logs.back().records.back().energy.total) << '\n';
  return Ok;
}

int cmd_atlas(const Options& o, AtlasVariant variant) {
  const bool ht = variant == AtlasVariant::Hypertemplate;
  const FShapeMesh base = load(o.mesh_a, o.center);
  std::vector<FShapeMesh> subjects;
  for (const auto& s : o.subjects) {
    subjects.push_back(load(s, o.center));
    check_same_dims(base, subjects.back(), s);
  }
  AtlasParams params = atlas_params(o);
  if (!ht) params.weights.gamma_V0 = 0.0;
  AtlasState state = AtlasState::make(variant, base, std::move(subjects));
  if (!ht) state.template_signal = base.signal;
  EstimationOptions eo = estimation_options(o);
  if (!ht) eo.regularizer = {o.sigma_reg > 0.0 ? o.sigma_reg : o.sigma_e, true};
  const EstimationResult r = estimate(std::move(state), params, eo);

  const fs::path dir = output_dir(o);
  save_checkpoint(r.state, params, dir / "checkpoint");
  write_logs(dir, r.logs);

  Manifest m(ht ? "atlas-ht" : "atlas-free", o);
  m.input(o.mesh_a);
  for (const auto& s : o.subjects) m.input(s);
  record_kernel(m, o);
  record_deformation(m, o);
  record_weights(m, o, ht);
  if (!ht) m.j["sigma_reg"] = eo.regularizer.sigma_reg;
  m.j["center"] = o.center;
  record_run(m, o, r);
  m.write(dir);
  std::cout << "final energy " << fmt(r.logs.back().records.back().energy.total) << '\n';
  return Ok;
}

int cmd_shoot(const Options& o) {
  const FShapeMesh mesh = load(o.mesh_a, false);
  if (!fs::exists(o.momenta)) throw IoError("file not found: " + o.momenta);
  const Points p0 = load_matrix(o.momenta);
  if (p0.rows() != mesh.num_vertices() || p0.cols() != mesh.ambient_dim()) {
    throw ValidationError("momenta must be " + std::to_string(mesh.num_vertices()) + " x " +
                          std::to_string(mesh.ambient_dim()) + ", got " + std::to_string(p0.rows()) + " x " +
                          std::to_string(p0.cols()));
  }
  auto vector_file = [&](const std::string& path) -> Signal {
    if (path.empty()) return Signal::Zero(mesh.num_vertices());
    if (!fs::exists(path)) throw IoError("file not found: " + path);
    const Eigen::MatrixXd v = load_matrix(path);
    if (v.cols() != 1 || v.rows() != mesh.num_vertices()) {
      throw ValidationError(path + ": expected one value per vertex");
    }
    return v.col(0);
  };
  const DeformationKernelConfig dcfg = DeformationKernelConfig::from_scales(o.sigma_v);
  const bool meta = o.model == "metamorphosis";
  ShootState s;
  double h0 = 0.0, h1 = 0.0;
  if (meta) {
    const Signal pf = vector_file(o.signal_momenta);
    s = shoot_metamorphosis(mesh.vertices, p0, mesh.signal, pf, mesh.cells, dcfg, o.gamma_v, o.gamma_f, o.nsteps);
    h0 = hamiltonian_metamorphosis(s.positions.front(), s.momenta.front(), pf, mesh.cells, dcfg, o.gamma_v, o.gamma_f);
    h1 = hamiltonian_metamorphosis(s.positions.back(), s.momenta.back(), pf, mesh.cells, dcfg, o.gamma_v, o.gamma_f);
  } else {
    s = shoot_tangential(mesh.vertices, p0, mesh.signal, vector_file(o.residual), dcfg, o.gamma_v, o.nsteps);
    h0 = hamiltonian_geo(s.positions.front(), s.momenta.front(), dcfg, o.gamma_v);
    h1 = hamiltonian_geo(s.positions.back(), s.momenta.back(), dcfg, o.gamma_v);
  }
  const double drift = h0 != 0.0 ? std::abs(h1 - h0) / std::abs(h0) : std::abs(h1 - h0);
  const fs::path dir = output_dir(o);
  write_frames(dir / "trajectory", s, mesh.cells, o.frames);

  Manifest m("shoot", o);
  m.input(o.mesh_a);
  m.input(o.momenta);
  if (!o.residual.empty()) m.input(o.residual);
  if (!o.signal_momenta.empty()) m.input(o.signal_momenta);
  record_deformation(m, o);
  m.j["model"] = o.model;
  m.j["gamma_v"] = o.gamma_v;
  if (meta) m.j["gamma_f"] = o.gamma_f;
  m.j["hamiltonian_drift"] = drift;
  m.write(dir);
  std::cout << "hamiltonian drift " << fmt(drift) << '\n';
  return Ok;
}

int cmd_synth(const Options& o) {
  const std::vector<FShapeMesh> meshes = synth(o.shape, o.points, o.seed, o.noise);
  const fs::path dir = output_dir(o);
  if (meshes.size() == 2) {
    save_fshape(meshes[0], dir / (o.shape + "_source.fshape"), MeshFormat::NativeAscii);
    save_fshape(meshes[1], dir / (o.shape + "_target.fshape"), MeshFormat::NativeAscii);
  } else {
    save_fshape(meshes[0], dir / (o.shape + ".fshape"), MeshFormat::NativeAscii);
  }
  Manifest m("synth", o);
  m.j["shape"] = o.shape;
  m.j["points"] = o.points;
  m.j["seed"] = o.seed;
  m.j["noise"] = o.noise;
  m.write(dir);
  return Ok;
}

}  // namespace

std::string help_text() {
  CLI::App app{"fshapes"};
  app.name("fshapes");
  Options o;
  build(app, o);
  std::string out = app.help();
  for (const auto* sub : app.get_subcommands({})) out += "\n" + sub->help();
  return out;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"fshapes"};
  app.name("fshapes");
  Options o;
  build(app, o);
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Ok : Validation;
  }
  try {
    if (o.threads < 0) throw ValidationError("--threads must be nonnegative");
    if (o.threads > 0) omp_set_num_threads(o.threads);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "dist") return cmd_dist(o);
    if (cmd == "match") return cmd_match(o);
    if (cmd == "atlas-ht") return cmd_atlas(o, AtlasVariant::Hypertemplate);
    if (cmd == "atlas-free") return cmd_atlas(o, AtlasVariant::Free);
    if (cmd == "shoot") return cmd_shoot(o);
    return cmd_synth(o);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return Io;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return Numerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return Validation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return Validation;
  }
}

}  // namespace fshapes::cli
