#include "fshapes/estimation.hpp"

#include "fshapes/errors.hpp"

#include <memory>

namespace fshapes {

namespace {

Eigen::VectorXd flat(const Eigen::MatrixXd& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }

Points shaped(const Eigen::VectorXd& v, Index rows, Index cols) {
  if (v.size() != rows * cols) throw ValidationError("block size does not match the state");
  return Eigen::Map<const Points>(v.data(), rows, cols);
}

Blocks pack_gradient(const AtlasGradient& g, bool fixed_template) {
  Blocks out;
  if (!fixed_template) {
    out.push_back(flat(g.geometry));
    out.push_back(g.template_signal);
  }
  for (const auto& p : g.momenta) out.push_back(flat(p));
  for (const auto& z : g.residuals) out.push_back(z);
  return out;
}

}  // namespace

Blocks pack_blocks(const AtlasState& state, bool fixed_template) {
  Blocks out;
  if (!fixed_template) {
    out.push_back(flat(state.variant == AtlasVariant::Hypertemplate ? state.p0 : state.base.vertices));
    out.push_back(state.template_signal);
  }
  for (const auto& p : state.momenta) out.push_back(flat(p));
  for (const auto& z : state.residuals) out.push_back(z);
  return out;
}

void unpack_blocks(const Blocks& blocks, bool fixed_template, AtlasState& state) {
  const std::size_t N = state.num_subjects();
  const std::size_t first = fixed_template ? 0 : 2;
  if (blocks.size() != first + 2 * N) throw ValidationError("wrong number of blocks for the atlas state");
  const Index P = state.num_vertices();
  const Index n = state.base.ambient_dim();
  if (!fixed_template) {
    Points& geometry = state.variant == AtlasVariant::Hypertemplate ? state.p0 : state.base.vertices;
    geometry = shaped(blocks[0], P, n);
    state.template_signal = blocks[1];
  }
  for (std::size_t i = 0; i < N; ++i) {
    state.momenta[i] = shaped(blocks[first + i], P, n);
    state.residuals[i] = blocks[first + N + i];
  }
}

Objective atlas_objective(const AtlasState& state, const AtlasParams& params, const EstimationOptions& options,
                          const NormalizationConstants& constants) {
  // The closures own a working copy of the state; blocks overwrite it.
  auto work = std::make_shared<AtlasState>(state);
  AtlasParams p = params;
  const int d = state.base.cell_dim();
  if (options.normalize) p.weights = normalize(params.weights, constants, d);
  const bool fixed = options.fixed_template;

  Objective o;
  o.energy = [work, p, fixed](const Blocks& u) {
    unpack_blocks(u, fixed, *work);
    return atlas_energy(*work, p);
  };
  o.evaluate = [work, p, fixed, options, constants](const Blocks& u, Blocks& grad) {
    unpack_blocks(u, fixed, *work);
    AtlasGradient g = atlas_gradient(*work, p);
    if (options.normalize) normalize(g, work->variant, constants, work->num_vertices());
    if (work->variant == AtlasVariant::Free && !fixed && options.regularizer.enabled) {
      g.geometry = regularize_gradient(work->base.vertices, g.geometry, options.regularizer);
    }
    grad = pack_gradient(g, fixed);
    return g.energy;
  };
  return o;
}

EstimationResult estimate(AtlasState state, const AtlasParams& params, const EstimationOptions& options) {
  state.validate();
  EstimationResult out;
  out.constants = options.normalize ? NormalizationConstants::from_subjects(state.subjects) : NormalizationConstants{};

  std::vector<ScaleStage> schedule = options.schedule;
  if (schedule.empty()) schedule.push_back({params.kernel, options.iters});

  Blocks init = pack_blocks(state, options.fixed_template);
  OptimizerConfig cfg;
  cfg.step_sizes.assign(init.size(), options.step);
  cfg.s_minus = options.s_minus;
  cfg.s_plus = options.s_plus;

  auto problem = [&](const KernelConfig& k) {
    AtlasParams p = params;
    p.kernel = k;
    return atlas_objective(state, p, options, out.constants);
  };
  MultiscaleResult r = multiscale_run(problem, std::move(init), cfg, schedule);
  unpack_blocks(r.blocks, options.fixed_template, state);
  out.state = std::move(state);
  out.logs = std::move(r.stages);
  return out;
}

}  // namespace fshapes
