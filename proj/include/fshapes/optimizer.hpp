#pragma once

#include "fshapes/energy.hpp"
#include "fshapes/fvarifold.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fshapes {

/// Optimization variables, one flat vector per block.
using Blocks = std::vector<Eigen::VectorXd>;

struct Objective {
  std::function<EnergyBreakdown(const Blocks&)> energy;
  /// Energy at `u`, gradient written to `grad` (same layout as `u`).
  std::function<EnergyBreakdown(const Blocks& u, Blocks& grad)> evaluate;
};

/// One stage of a multiscale schedule: kernel widths and an iteration budget.
struct ScaleStage {
  KernelConfig kernel;
  int iters = 0;
};

struct OptimizerConfig {
  std::vector<double> step_sizes;  // delta_1..delta_K
  double s_minus = 0.5;
  double s_plus = 1.2;
  int max_iters = 100;
  std::optional<double> min_step;      // default 1e-12 * initial delta_i, per block
  std::optional<double> min_decrease;  // default 1e-10 * |J_init|
  /// Written with the current blocks when the objective turns non-finite.
  std::optional<std::filesystem::path> dump_path;

  void validate(std::size_t num_blocks) const;
};

enum class Candidate { Initial, Joint, Block, Uniform };

struct IterationRecord {
  int iteration = 0;
  EnergyBreakdown energy;
  std::vector<double> steps;
  Candidate candidate = Candidate::Initial;
  int block = -1;  // for Candidate::Block
  double wall_seconds = 0.0;
};

/// Record 0 holds the initial energy; each further record is an accepted step.
struct RunLog {
  std::vector<IterationRecord> records;
  int iterations = 0;
  std::string stop_reason;

  /// Columns: iteration, total, geometric, functional, attachment, delta_1..delta_K.
  std::string csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct MinimizeResult {
  Blocks blocks;
  RunLog log;
};

/// Adaptive multi-rate gradient descent with per-block step sizes.
MinimizeResult minimize(const Objective& objective, Blocks init, const OptimizerConfig& cfg);

struct MultiscaleResult {
  Blocks blocks;
  std::vector<RunLog> stages;
};

/// Runs minimize() once per stage with the objective rebuilt for the stage's
/// kernel, warm-starting from the previous stage. Step sizes restart from
/// cfg.step_sizes and stage.iters replaces cfg.max_iters.
MultiscaleResult multiscale_run(const std::function<Objective(const KernelConfig&)>& problem, Blocks init,
                                const OptimizerConfig& cfg, const std::vector<ScaleStage>& schedule);

/// Parses "se,sf@iters;se,sf@iters;...", keeping sigma_t from `base`.
std::vector<ScaleStage> parse_schedule(const std::string& text, const KernelConfig& base);

}  // namespace fshapes
