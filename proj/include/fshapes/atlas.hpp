#pragma once

#include "fshapes/deformation.hpp"
#include "fshapes/energy.hpp"
#include "fshapes/fvarifold.hpp"
#include "fshapes/mesh.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace fshapes {

/// Balance coefficients of the atlas functionals.
struct AtlasWeights {
  double gamma_V0 = 0.0;  // hypertemplate-to-template deformation
  double gamma_f0 = 0.0;  // template signal
  double gamma_V = 1.0;   // template-to-subject deformations
  double gamma_f = 0.0;   // residual signals
  double gamma_W = 1.0;   // data attachment

  void validate() const;
};

/// An observation together with its Dirac representation.
struct Subject {
  FShapeMesh mesh;
  DiracSet diracs;

  static Subject from_mesh(FShapeMesh mesh);
};

enum class AtlasVariant { Hypertemplate, Free };

/**
 * Optimization variables of an atlas estimation.
 *
 * Hypertemplate variant: `base` is the hypertemplate (its signal is ignored
 * and treated as 0) and the template vertices are the endpoint of the
 * geodesic shot from `base.vertices` with momentum `p0`; they are never
 * stored. Free variant: `base.vertices` are the template vertices and `p0`
 * is empty. In both cases the template connectivity is `base.cells`.
 */
struct AtlasState {
  AtlasVariant variant = AtlasVariant::Free;
  FShapeMesh base;
  Points p0;
  Signal template_signal;
  std::vector<Points> momenta;
  std::vector<Signal> residuals;
  std::vector<Subject> subjects;

  /// Zero momenta, signal and residuals.
  static AtlasState make(AtlasVariant variant, FShapeMesh base, std::vector<FShapeMesh> subjects);

  Index num_vertices() const { return base.num_vertices(); }
  std::size_t num_subjects() const { return subjects.size(); }
  void validate() const;
};

struct AtlasParams {
  KernelConfig kernel;
  DeformationKernelConfig deformation;
  AtlasWeights weights;
  int nsteps = 10;
};

/// Template vertices: shot from the hypertemplate, or stored directly.
Points template_vertices(const AtlasState& state, const DeformationKernelConfig& dcfg, int nsteps);

/// Gradient blocks, in the same layout as AtlasState. `geometry` is the
/// gradient in p0 (hypertemplate) or in the template vertices (free).
struct AtlasGradient {
  Points geometry;
  Signal template_signal;
  std::vector<Points> momenta;
  std::vector<Signal> residuals;
  EnergyBreakdown energy;
};

/// Hypertemplate functional. Deformation penalties use |v|_V^2 = (K p | p),
/// signal penalties the lumped L2 norm on the current template vertices.
EnergyBreakdown energy_ht(const AtlasState& state, const KernelConfig& kcfg, const DeformationKernelConfig& dcfg,
                          const AtlasWeights& w, int nsteps);
AtlasGradient grad_ht(const AtlasState& state, const KernelConfig& kcfg, const DeformationKernelConfig& dcfg,
                      const AtlasWeights& w, int nsteps);

/// Free-template functional (no gamma_V0 term; template vertices free).
EnergyBreakdown energy_free(const AtlasState& state, const KernelConfig& kcfg, const DeformationKernelConfig& dcfg,
                            const AtlasWeights& w, int nsteps);
/// `include_mass_gradient = false` drops the dependence of the signal
/// penalties on the template vertices; only useful as an ablation.
AtlasGradient grad_free(const AtlasState& state, const KernelConfig& kcfg, const DeformationKernelConfig& dcfg,
                        const AtlasWeights& w, int nsteps, bool include_mass_gradient = true);

/// Dispatch on state.variant.
EnergyBreakdown atlas_energy(const AtlasState& state, const AtlasParams& params);
AtlasGradient atlas_gradient(const AtlasState& state, const AtlasParams& params);

struct GradientRegularizer {
  double sigma_reg = 1.0;
  bool enabled = true;
};

/// Row-normalized Gaussian smoothing of a per-vertex vector field:
/// out_k = sum_j K(x_k, x_j) g_j / sum_j K(x_k, x_j).
Points regularize_gradient(const Points& x, const Points& grad_x, const GradientRegularizer& reg);

/**
 * Scale constants for unit-free energies and gradients.
 *
 * Term factors (energy and gradient of the term are multiplied by
 * R_e^a R_f^b):
 *
 *   | term                   | a     | b  |
 *   |------------------------|-------|----|
 *   | attachment g           | -2d   |  0 |
 *   | deformation (K p | p)  | -2    |  0 |
 *   | signal (D(x) h | h)    | -d    | -2 |
 *
 * Block preconditioning applied to gradients afterwards:
 *
 *   | block                  | unit factor | sampling factor |
 *   |------------------------|-------------|-----------------|
 *   | positions x            | R_e^2       | P               |
 *   | momenta p0, p^i        | R_e^2       | 1/P             |
 *   | signals f, zeta^i      | R_f^2       | P               |
 *
 * so the attachment x-gradient carries R_e^(2-2d) overall.
 */
struct NormalizationConstants {
  double R_e = 1.0;
  double R_f = 1.0;

  /// R_e = max_i sqrt(trace cov(x^i)), R_f = max_i sqrt(var f^i). A zero
  /// signal spread (constant signals) falls back to R_f = 1.
  static NormalizationConstants from_subjects(const std::vector<Subject>& subjects);

  double attachment_factor(int d) const;
  double deformation_factor() const;
  double signal_factor(int d) const;
};

/// Weights with the term factors folded in.
AtlasWeights normalize(const AtlasWeights& w, const NormalizationConstants& c, int d);
/// Scales each part of a raw breakdown by its term factor.
EnergyBreakdown normalize(const EnergyBreakdown& e, const NormalizationConstants& c, int d);
/// Block preconditioning of a gradient (see the table above). The geometry
/// block is a momentum for the hypertemplate variant, positions otherwise.
void normalize(AtlasGradient& g, AtlasVariant variant, const NormalizationConstants& c, Index P);

/// Checkpoint directory: template.fshape (template geometry and signal),
/// hypertemplate.fshape + p0.txt (hypertemplate variant), momenta_<i>.txt,
/// residual_<i>.txt.
void save_checkpoint(const AtlasState& state, const AtlasParams& params, const std::filesystem::path& dir);
/// Restores the variables; subjects are supplied by the caller.
AtlasState load_checkpoint(const std::filesystem::path& dir, AtlasVariant variant, std::vector<FShapeMesh> subjects);

/// Signal-only registration onto a fixed target:
/// J(f) = (gamma_f / 2) |f|_x^2 + || mu_(x,f) - mu_(y,g) ||^2.
struct SignalMatchOptions {
  int iters = 200;
  double step = 1.0;
};

Signal mass_cancellation_probe(const FShapeMesh& source, const FShapeMesh& target, double gamma_f,
                               const KernelConfig& kcfg, const SignalMatchOptions& options);

/// Energy and gradient of the signal-only functional, geometry precomputed.
class SignalMatchObjective {
 public:
  SignalMatchObjective(const FShapeMesh& source, const FShapeMesh& target, double gamma_f, const KernelConfig& kcfg);

  double energy(const Signal& f) const;
  double energy_and_gradient(const Signal& f, Signal& grad) const;

 private:
  double evaluate(const Signal& f, Signal* grad) const;

  FShapeMesh source_;
  MassMatrix mass_;
  DiracSet source_diracs_;
  DiracSet target_diracs_;
  Eigen::MatrixXd geo_self_;    // r_l r_m k_e k_t
  Eigen::MatrixXd geo_cross_;   // r_l s_m k_e k_t
  double target_self_ = 0.0;
  double gamma_f_ = 0.0;
  double inv_f_ = 1.0;
};

}  // namespace fshapes
