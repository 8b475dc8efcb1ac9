#include "fshapes/atlas.hpp"

#include "fshapes/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <string>

namespace fshapes {

namespace {

// Atlas geodesics are shot with unit kernel scaling (v = K p); the
// deformation cost gamma (K p | p) / 2 carries the balance coefficient.
constexpr double kShootGamma = 1.0;

struct SubjectTerms {
  double geometric = 0.0;
  double functional = 0.0;
  double attachment = 0.0;
  Points grad_x;  // gradient in the template vertices
  Points grad_p;
  Signal grad_zeta;  // D zeta part plus the attachment signal gradient
  Signal grad_f;     // attachment signal gradient alone
};

Points endpoint(const Points& x0, const Points& p0, const DeformationKernelConfig& dcfg, int nsteps) {
  const Signal zero = Signal::Zero(x0.rows());
  return shoot_tangential(x0, p0, zero, zero, dcfg, kShootGamma, nsteps).positions.back();
}

/// Every per-subject term, evaluated at template vertices `x`, template
/// signal `f` and template mass `mass`.
SubjectTerms subject_terms(const Points& x, const Signal& f, const Cells& cells, const MassMatrix& mass,
                           const Points& p, const Signal& zeta, const Subject& subject, const KernelConfig& kcfg,
                           const DeformationKernelConfig& dcfg, const AtlasWeights& w, int nsteps, bool gradient,
                           std::size_t index) {
  SubjectTerms out;
  try {
    out.geometric = w.gamma_V * hamiltonian_geo(x, p, dcfg, kShootGamma);
    out.functional = 0.5 * w.gamma_f * l2_inner(mass, zeta, zeta);
    const Points xt = endpoint(x, p, dcfg, nsteps);
    const Signal ft = f + zeta;
    if (!gradient) {
      out.attachment = 0.5 * w.gamma_W * attachment_value(xt, ft, cells, subject.diracs, kcfg);
      return out;
    }
    const AttachmentGradient g = attachment_gradient(xt, ft, cells, subject.diracs, kcfg);
    out.attachment = 0.5 * w.gamma_W * g.value;
    const AdjointGradient adj = adjoint_gradient(x, p, 0.5 * w.gamma_W * g.grad_x, Points::Zero(x.rows(), x.cols()),
                                                 dcfg, kShootGamma, nsteps);
    out.grad_f = 0.5 * w.gamma_W * g.grad_f;
    out.grad_zeta = w.gamma_f * (mass.weights.array() * zeta.array()).matrix() + out.grad_f;
    out.grad_p = w.gamma_V * hamiltonian_geo_dp(x, p, dcfg, kShootGamma) + adj.grad_p0;
    out.grad_x = w.gamma_V * hamiltonian_geo_dx(x, p, dcfg, kShootGamma) + adj.grad_x0;
  } catch (const DivergenceError& e) {
    throw DivergenceError("subject " + std::to_string(index) + ": " + e.what(), e.step());
  }
  return out;
}

struct Evaluation {
  EnergyBreakdown energy;
  AtlasGradient gradient;
};

Evaluation evaluate(const AtlasState& state, const KernelConfig& kcfg, const DeformationKernelConfig& dcfg,
                    const AtlasWeights& w, int nsteps, bool gradient, bool mass_gradient) {
  state.validate();
  kcfg.validate();
  dcfg.validate();
  w.validate();
  if (nsteps < 1) throw ValidationError("nsteps must be at least 1");
  const bool ht = state.variant == AtlasVariant::Hypertemplate;
  const Cells& cells = state.base.cells;
  const Index P = state.num_vertices();
  const int n = state.base.ambient_dim();

  double geometric = 0.0;
  Points x = state.base.vertices;
  if (ht) {
    geometric += w.gamma_V0 * hamiltonian_geo(x, state.p0, dcfg, kShootGamma);
    x = endpoint(state.base.vertices, state.p0, dcfg, nsteps);
  }
  const MassMatrix mass = mass_matrix(x, cells);
  const Signal& f = state.template_signal;
  double functional = 0.5 * w.gamma_f0 * l2_inner(mass, f, f);
  double attachment = 0.0;

  Evaluation out;
  Points grad_x = Points::Zero(P, n);
  Signal grad_f = Signal::Zero(P);
  Eigen::VectorXd mass_coeffs = 0.5 * w.gamma_f0 * f.array().square();
  for (std::size_t i = 0; i < state.num_subjects(); ++i) {
    SubjectTerms t = subject_terms(x, f, cells, mass, state.momenta[i], state.residuals[i], state.subjects[i], kcfg,
                                   dcfg, w, nsteps, gradient, i);
    geometric += t.geometric;
    functional += t.functional;
    attachment += t.attachment;
    if (gradient) {
      grad_x += t.grad_x;
      grad_f += t.grad_f;
      mass_coeffs += 0.5 * w.gamma_f * state.residuals[i].array().square().matrix();
      out.gradient.momenta.push_back(std::move(t.grad_p));
      out.gradient.residuals.push_back(std::move(t.grad_zeta));
    }
  }
  out.energy = EnergyBreakdown::make(geometric, functional, attachment);
  if (!std::isfinite(out.energy.total)) throw NumericalError("atlas energy is not finite");
  if (!gradient) return out;

  if (mass_gradient) grad_x += grad_mass_weights(x, cells, mass_coeffs);
  out.gradient.template_signal = w.gamma_f0 * (mass.weights.array() * f.array()).matrix() + grad_f;
  if (ht) {
    const AdjointGradient adj = adjoint_gradient(state.base.vertices, state.p0, grad_x, Points::Zero(P, n), dcfg,
                                                 kShootGamma, nsteps);
    out.gradient.geometry = w.gamma_V0 * hamiltonian_geo_dp(state.base.vertices, state.p0, dcfg, kShootGamma) +
                            adj.grad_p0;
  } else {
    out.gradient.geometry = std::move(grad_x);
  }
  out.gradient.energy = out.energy;
  return out;
}

void require_variant(const AtlasState& state, AtlasVariant v) {
  if (state.variant != v) throw ValidationError("atlas state has the wrong variant for this functional");
}

std::string index_name(const char* stem, std::size_t i) { return std::string(stem) + "_" + std::to_string(i) + ".txt"; }

}  // namespace

void AtlasWeights::validate() const {
  for (double g : {gamma_V0, gamma_f0, gamma_V, gamma_f, gamma_W}) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw ValidationError("atlas weights must be finite and nonnegative");
  }
  if (!(gamma_V > 0.0) || !(gamma_W > 0.0)) throw ValidationError("gamma_V and gamma_W must be positive");
}

Subject Subject::from_mesh(FShapeMesh mesh) {
  validate(mesh);
  Subject s;
  s.diracs = to_diracs(mesh);
  s.mesh = std::move(mesh);
  return s;
}

AtlasState AtlasState::make(AtlasVariant variant, FShapeMesh base, std::vector<FShapeMesh> subjects) {
  fshapes::validate(base);
  AtlasState s;
  s.variant = variant;
  const Index P = base.num_vertices();
  const int n = base.ambient_dim();
  if (variant == AtlasVariant::Hypertemplate) {
    base.signal.setZero();
    s.p0 = Points::Zero(P, n);
  }
  s.base = std::move(base);
  s.template_signal = Signal::Zero(P);
  for (auto& m : subjects) {
    s.subjects.push_back(Subject::from_mesh(std::move(m)));
    s.momenta.push_back(Points::Zero(P, n));
    s.residuals.push_back(Signal::Zero(P));
  }
  s.validate();
  return s;
}

void AtlasState::validate() const {
  fshapes::validate(base);
  const Index P = num_vertices();
  const int n = base.ambient_dim();
  if (variant == AtlasVariant::Hypertemplate) {
    if (p0.rows() != P || p0.cols() != n) throw ValidationError("p0 must have one covector per template vertex");
    if (!p0.allFinite()) throw ValidationError("p0 is not finite");
  }
  if (template_signal.size() != P || !template_signal.allFinite()) {
    throw ValidationError("template signal must be finite with one value per vertex");
  }
  if (subjects.empty()) throw ValidationError("an atlas needs at least one subject");
  if (momenta.size() != subjects.size() || residuals.size() != subjects.size()) {
    throw ValidationError("one momentum field and one residual per subject expected");
  }
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& m = subjects[i].mesh;
    if (m.ambient_dim() != n || m.cell_dim() != base.cell_dim()) {
      throw ValidationError("subject " + std::to_string(i) + " differs in dimension from the template");
    }
    if (momenta[i].rows() != P || momenta[i].cols() != n || !momenta[i].allFinite()) {
      throw ValidationError("momenta of subject " + std::to_string(i) + " have the wrong shape or are not finite");
    }
    if (residuals[i].size() != P || !residuals[i].allFinite()) {
      throw ValidationError("residual of subject " + std::to_string(i) + " has the wrong length or is not finite");
    }
  }
}

Points template_vertices(const AtlasState& state, const DeformationKernelConfig& dcfg, int nsteps) {
  if (state.variant == AtlasVariant::Free) return state.base.vertices;
  return endpoint(state.base.vertices, state.p0, dcfg, nsteps);
}

EnergyBreakdown energy_ht(const AtlasState& state, const KernelConfig& kcfg, const DeformationKernelConfig& dcfg,
                          const AtlasWeights& w, int nsteps) {
  require_variant(state, AtlasVariant::Hypertemplate);
  return evaluate(state, kcfg, dcfg, w, nsteps, false, true).energy;
}

AtlasGradient grad_ht(const AtlasState& state, const KernelConfig& kcfg, const DeformationKernelConfig& dcfg,
                      const AtlasWeights& w, int nsteps) {
  require_variant(state, AtlasVariant::Hypertemplate);
  return evaluate(state, kcfg, dcfg, w, nsteps, true, true).gradient;
}

EnergyBreakdown energy_free(const AtlasState& state, const KernelConfig& kcfg, const DeformationKernelConfig& dcfg,
                            const AtlasWeights& w, int nsteps) {
  require_variant(state, AtlasVariant::Free);
  return evaluate(state, kcfg, dcfg, w, nsteps, false, true).energy;
}

AtlasGradient grad_free(const AtlasState& state, const KernelConfig& kcfg, const DeformationKernelConfig& dcfg,
                        const AtlasWeights& w, int nsteps, bool include_mass_gradient) {
  require_variant(state, AtlasVariant::Free);
  return evaluate(state, kcfg, dcfg, w, nsteps, true, include_mass_gradient).gradient;
}

EnergyBreakdown atlas_energy(const AtlasState& state, const AtlasParams& params) {
  return evaluate(state, params.kernel, params.deformation, params.weights, params.nsteps, false, true).energy;
}

AtlasGradient atlas_gradient(const AtlasState& state, const AtlasParams& params) {
  return evaluate(state, params.kernel, params.deformation, params.weights, params.nsteps, true, true).gradient;
}

Points regularize_gradient(const Points& x, const Points& grad_x, const GradientRegularizer& reg) {
  if (!reg.enabled) return grad_x;
  if (!(reg.sigma_reg > 0.0) || !std::isfinite(reg.sigma_reg)) throw ValidationError("sigma_reg must be positive");
  if (x.rows() != grad_x.rows() || x.cols() != grad_x.cols()) throw ValidationError("gradient shape mismatch");
  const Index P = x.rows();
  const double inv = 1.0 / (reg.sigma_reg * reg.sigma_reg);
  Points out(P, x.cols());
#pragma omp parallel
  {
    Eigen::ArrayXd k;
#pragma omp for schedule(static)
    for (Index i = 0; i < P; ++i) {
      k.setZero(P);
      for (Index c = 0; c < x.cols(); ++c) k += (x.col(c).array() - x(i, c)).square();
      k = (-inv * k).exp();
      const double norm = k.sum();
      for (Index c = 0; c < x.cols(); ++c) out(i, c) = (k * grad_x.col(c).array()).sum() / norm;
    }
  }
  return out;
}

void save_checkpoint(const AtlasState& state, const AtlasParams& params, const std::filesystem::path& dir) {
  state.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  FShapeMesh templ{template_vertices(state, params.deformation, params.nsteps), state.template_signal,
                   state.base.cells};
  save_fshape(templ, dir / "template.fshape", MeshFormat::NativeAscii);
  if (state.variant == AtlasVariant::Hypertemplate) {
    save_fshape(state.base, dir / "hypertemplate.fshape", MeshFormat::NativeAscii);
    save_matrix(state.p0, dir / "p0.txt");
  }
  for (std::size_t i = 0; i < state.num_subjects(); ++i) {
    save_matrix(state.momenta[i], dir / index_name("momenta", i));
    save_matrix(state.residuals[i], dir / index_name("residual", i));
  }

  nlohmann::json j;
  j["variant"] = state.variant == AtlasVariant::Hypertemplate ? "hypertemplate" : "free";
  j["subjects"] = state.num_subjects();
  j["sigma_e"] = params.kernel.sigma_e;
  j["sigma_t"] = params.kernel.sigma_t;
  j["sigma_f"] = params.kernel.sigma_f;
  j["sigma_v"] = params.deformation.scales;
  j["sigma_v_weights"] = params.deformation.weights;
  j["gamma_v0"] = params.weights.gamma_V0;
  j["gamma_f0"] = params.weights.gamma_f0;
  j["gamma_v"] = params.weights.gamma_V;
  j["gamma_f"] = params.weights.gamma_f;
  j["gamma_w"] = params.weights.gamma_W;
  j["nsteps"] = params.nsteps;
  std::ofstream os(dir / "atlas.json");
  if (!os) throw IoError("cannot write " + (dir / "atlas.json").string());
  os << j.dump(2) << '\n';
}

AtlasState load_checkpoint(const std::filesystem::path& dir, AtlasVariant variant, std::vector<FShapeMesh> subjects) {
  if (!std::filesystem::is_directory(dir)) throw IoError("checkpoint directory not found: " + dir.string());
  const FShapeMesh templ = load_fshape(dir / "template.fshape", MeshFormat::NativeAscii);
  AtlasState s;
  if (variant == AtlasVariant::Hypertemplate) {
    s = AtlasState::make(variant, load_fshape(dir / "hypertemplate.fshape", MeshFormat::NativeAscii),
                         std::move(subjects));
    s.p0 = load_matrix(dir / "p0.txt");
  } else {
    s = AtlasState::make(variant, templ, std::move(subjects));
  }
  s.template_signal = templ.signal;
  for (std::size_t i = 0; i < s.num_subjects(); ++i) {
    s.momenta[i] = load_matrix(dir / index_name("momenta", i));
    const Eigen::MatrixXd r = load_matrix(dir / index_name("residual", i));
    if (r.cols() != 1) throw ParseError("residual file must have one column: " + index_name("residual", i));
    s.residuals[i] = r.col(0);
  }
  s.validate();
  return s;
}

}  // namespace fshapes
