#pragma once

#include "fshapes/atlas.hpp"
#include "fshapes/optimizer.hpp"

#include <vector>

namespace fshapes {

struct EstimationOptions {
  /// Initial step size of every block (unit-free when normalizing).
  double step = 0.1;
  int iters = 100;
  double s_minus = 0.5;
  double s_plus = 1.2;
  /// Unit-free energies and preconditioned gradients.
  bool normalize = true;
  /// Smoothing of the template-vertex gradient (free variant only).
  GradientRegularizer regularizer{1.0, false};
  /// Empty: a single stage with the parameters' kernel and `iters`.
  std::vector<ScaleStage> schedule;
  /// Registration: only the subject momenta and residuals move.
  bool fixed_template = false;
};

struct EstimationResult {
  AtlasState state;
  std::vector<RunLog> logs;  // one per stage
  NormalizationConstants constants;
};

/// Block layout: [geometry, template signal, p^1..p^N, zeta^1..zeta^N], where
/// geometry is p0 (hypertemplate) or the template vertices (free). With a
/// fixed template the first two blocks are absent.
Blocks pack_blocks(const AtlasState& state, bool fixed_template);
void unpack_blocks(const Blocks& blocks, bool fixed_template, AtlasState& state);

/// The (normalized) atlas objective over pack_blocks(state) for `params`.
Objective atlas_objective(const AtlasState& state, const AtlasParams& params, const EstimationOptions& options,
                          const NormalizationConstants& constants);

/// Runs the adaptive descent (one minimize per schedule stage).
EstimationResult estimate(AtlasState state, const AtlasParams& params, const EstimationOptions& options);

}  // namespace fshapes
