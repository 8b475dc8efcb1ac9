#include "fshapes/atlas.hpp"

#include "fshapes/errors.hpp"
#include "fshapes/optimizer.hpp"
#include "reduce.hpp"

#include <cmath>

namespace fshapes {

namespace {

/// r_l s_m k_e(l, m) k_t(l, m) for every pair.
Eigen::MatrixXd geometric_factors(const DiracSet& a, const DiracSet& b, const KernelConfig& cfg) {
  const double inv_e = 1.0 / (cfg.sigma_e * cfg.sigma_e);
  const double inv_t = 2.0 / (cfg.sigma_t * cfg.sigma_t);
  Eigen::MatrixXd out(b.size(), a.size());  // column l holds row l of the kernel
#pragma omp parallel
  {
    Eigen::ArrayXd k, c;
#pragma omp for schedule(static)
    for (Index l = 0; l < a.size(); ++l) {
      k.setZero(b.size());
      c.setZero(b.size());
      for (int j = 0; j < a.ambient_dim(); ++j) {
        k += (b.centers.col(j).array() - a.centers(l, j)).square();
        c += b.directions.col(j).array() * a.directions(l, j);
      }
      out.col(l) = (a.weights(l) * b.weights.array() * (-inv_e * k - inv_t * (1.0 - c.square())).exp()).matrix();
    }
  }
  return out;
}

}  // namespace

SignalMatchObjective::SignalMatchObjective(const FShapeMesh& source, const FShapeMesh& target, double gamma_f,
                                           const KernelConfig& kcfg)
    : source_(source), gamma_f_(gamma_f) {
  validate(source);
  validate(target);
  kcfg.validate();
  if (source.ambient_dim() != target.ambient_dim() || source.cell_dim() != target.cell_dim()) {
    throw ValidationError("source and target differ in dimension");
  }
  if (!(gamma_f >= 0.0) || !std::isfinite(gamma_f)) throw ValidationError("gamma_f must be nonnegative");
  mass_ = mass_matrix(source);
  source_diracs_ = to_diracs(source);
  target_diracs_ = to_diracs(target);
  geo_self_ = geometric_factors(source_diracs_, source_diracs_, kcfg);
  geo_cross_ = geometric_factors(source_diracs_, target_diracs_, kcfg);
  target_self_ = inner_product(target_diracs_, target_diracs_, kcfg);
  inv_f_ = 1.0 / (kcfg.sigma_f * kcfg.sigma_f);
}

double SignalMatchObjective::energy(const Signal& f) const { return evaluate(f, nullptr); }

double SignalMatchObjective::energy_and_gradient(const Signal& f, Signal& grad) const { return evaluate(f, &grad); }

double SignalMatchObjective::evaluate(const Signal& f, Signal* grad) const {
  if (f.size() != source_.num_vertices()) throw ValidationError("signal length does not match vertex count");
  const Index T = source_.num_cells();
  const int d = source_.cell_dim();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(T);
  for (Index l = 0; l < T; ++l) {
    for (int a = 0; a <= d; ++a) mean(l) += f(source_.cells(l, a));
  }
  mean /= static_cast<double>(d + 1);
  const Eigen::VectorXd& g = target_diracs_.mean_signals;

  Eigen::VectorXd rows(T), gmean(T);
#pragma omp parallel
  {
    Eigen::ArrayXd ks, kc;
#pragma omp for schedule(static)
    for (Index l = 0; l < T; ++l) {
      const Eigen::ArrayXd ds = mean.array() - mean(l);
      const Eigen::ArrayXd dc = g.array() - mean(l);
      ks = geo_self_.col(l).array() * (-inv_f_ * ds.square()).exp();
      kc = geo_cross_.col(l).array() * (-inv_f_ * dc.square()).exp();
      rows(l) = ks.sum() - 2.0 * kc.sum();
      // d/dmean_l of <a,a> is twice the row derivative (symmetric kernel).
      gmean(l) = 4.0 * inv_f_ * ((ks * ds).sum() - (kc * dc).sum());
    }
  }
  const double attach = detail::compensated_sum(rows) + target_self_;
  const double value = 0.5 * gamma_f_ * l2_inner(mass_, f, f) + attach;
  if (grad) {
    *grad = gamma_f_ * (mass_.weights.array() * f.array()).matrix();
    const double share = 1.0 / static_cast<double>(d + 1);
    for (Index l = 0; l < T; ++l) {
      for (int a = 0; a <= d; ++a) (*grad)(source_.cells(l, a)) += share * gmean(l);
    }
  }
  return value;
}

Signal mass_cancellation_probe(const FShapeMesh& source, const FShapeMesh& target, double gamma_f,
                               const KernelConfig& kcfg, const SignalMatchOptions& options) {
  const SignalMatchObjective obj(source, target, gamma_f, kcfg);
  const Eigen::VectorXd w = mass_matrix(source).weights;
  // Gradient in the lumped L2 metric: steps are unit-free in the sampling.
  const Eigen::VectorXd inv_w = (w.array() > 0.0).select(w.array().inverse(), 0.0);

  Objective o;
  o.energy = [&](const Blocks& u) { return EnergyBreakdown::scalar(obj.energy(u[0])); };
  o.evaluate = [&](const Blocks& u, Blocks& grad) {
    Signal g;
    const double j = obj.energy_and_gradient(u[0], g);
    grad = {(g.array() * inv_w.array()).matrix()};
    return EnergyBreakdown::scalar(j);
  };
  OptimizerConfig cfg;
  cfg.step_sizes = {options.step};
  cfg.max_iters = options.iters;
  cfg.min_decrease = 0.0;
  return minimize(o, {source.signal}, cfg).blocks[0];
}

}  // namespace fshapes
