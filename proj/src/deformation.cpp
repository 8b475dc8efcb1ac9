#include "fshapes/deformation.hpp"

#include "fshapes/errors.hpp"
#include "reduce.hpp"

#include <array>
#include <cmath>
#include <string>

namespace fshapes {

namespace {

/// Kernel values against particle k: K_kj, and the radial derivative
/// factors D_kj (dK = D (x_k - x_j)) and E_kj (dD = E (x_k - x_j)).
struct KernelRow {
  Eigen::ArrayXd sqd, K, D, E, e;

  void compute(const Points& x, Index k, const DeformationKernelConfig& cfg, bool second_order) {
    const Index P = x.rows();
    sqd.setZero(P);
    for (Index c = 0; c < x.cols(); ++c) sqd += (x.col(c).array() - x(k, c)).square();
    K.setZero(P);
    D.setZero(P);
    if (second_order) E.setZero(P);
    for (std::size_t s = 0; s < cfg.scales.size(); ++s) {
      const double inv = 1.0 / (cfg.scales[s] * cfg.scales[s]);
      e = (-inv * sqd).exp() * cfg.weights[s];
      K += e;
      D += (-2.0 * inv) * e;
      if (second_order) E += (4.0 * inv * inv) * e;
    }
  }
};

/// (dH/dp, -dH/dx) in one pass over particle pairs.
void hamiltonian_field(const Points& x, const Points& p, const DeformationKernelConfig& cfg, double gamma, Points& vx,
                       Points& vp) {
  const Index P = x.rows();
  const int n = static_cast<int>(x.cols());
  vx.resize(P, n);
  vp.resize(P, n);
  const double inv_gamma = 1.0 / gamma;
#pragma omp parallel
  {
    KernelRow row;
    Eigen::ArrayXd pp, w;
#pragma omp for schedule(static)
    for (Index k = 0; k < P; ++k) {
      row.compute(x, k, cfg, false);
      pp.setZero(P);
      for (int c = 0; c < n; ++c) pp += p.col(c).array() * p(k, c);
      w = pp * row.D;
      const double wsum = w.sum();
      for (int c = 0; c < n; ++c) {
        vx(k, c) = inv_gamma * (row.K * p.col(c).array()).sum();
        // dH/dx_k = (1/gamma) sum_j <p_k,p_j> D_kj (x_k - x_j)
        vp(k, c) = -inv_gamma * (x(k, c) * wsum - (w * x.col(c).array()).sum());
      }
    }
  }
}

void check_state(const Points& x, const Points& p) {
  if (x.rows() != p.rows() || x.cols() != p.cols()) {
    throw ValidationError("positions and momenta shapes differ");
  }
  if (x.cols() != 2 && x.cols() != 3) throw ValidationError("ambient dimension must be 2 or 3");
}

void check_finite(const Points& x, const Points& p, int step) {
  if (!x.allFinite() || !p.allFinite()) {
    throw DivergenceError("geodesic shooting diverged at step " + std::to_string(step), step);
  }
}

struct Stage {
  Points x, p;
};

/// RK4 steps for the tangential system, keeping the four stage states of
/// each step for the adjoint sweep when `stages` is non-null.
void integrate_tangential(const Points& x0, const Points& p0, const DeformationKernelConfig& cfg, double gamma,
                          int nsteps, std::vector<Points>* xs, std::vector<Points>* ps,
                          std::vector<std::array<Stage, 4>>* stages) {
  const double h = 1.0 / nsteps;
  Points x = x0, p = p0;
  Points k1x, k1p, k2x, k2p, k3x, k3p, k4x, k4p;
  if (xs) xs->push_back(x);
  if (ps) ps->push_back(p);
  for (int i = 0; i < nsteps; ++i) {
    std::array<Stage, 4> st;
    st[0] = {x, p};
    hamiltonian_field(x, p, cfg, gamma, k1x, k1p);
    st[1] = {x + 0.5 * h * k1x, p + 0.5 * h * k1p};
    hamiltonian_field(st[1].x, st[1].p, cfg, gamma, k2x, k2p);
    st[2] = {x + 0.5 * h * k2x, p + 0.5 * h * k2p};
    hamiltonian_field(st[2].x, st[2].p, cfg, gamma, k3x, k3p);
    st[3] = {x + h * k3x, p + h * k3p};
    hamiltonian_field(st[3].x, st[3].p, cfg, gamma, k4x, k4p);
    x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    p += (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    check_finite(x, p, i + 1);
    if (stages) stages->push_back(std::move(st));
    if (xs) xs->push_back(x);
    if (ps) ps->push_back(p);
  }
}

Eigen::VectorXd inverse_mass(const MassMatrix& mass, const Signal& pf) {
  Eigen::VectorXd inv(pf.size());
  for (Index k = 0; k < pf.size(); ++k) {
    const double w = mass.weights(k);
    if (w > 0.0) {
      inv(k) = 1.0 / w;
    } else if (pf(k) != 0.0) {
      throw SingularMassError("vertex " + std::to_string(k) + " has zero mass but nonzero signal momentum", k);
    } else {
      inv(k) = 0.0;
    }
  }
  return inv;
}

void metamorphosis_field(const Points& x, const Points& p, const Signal& pf, const Cells& cells,
                         const DeformationKernelConfig& cfg, double gamma_V, double gamma_f, Points& vx, Points& vp,
                         Signal& vf) {
  hamiltonian_field(x, p, cfg, gamma_V, vx, vp);
  const Eigen::VectorXd inv = inverse_mass(mass_matrix(x, cells), pf);
  vf = (pf.array() * inv.array()) / gamma_f;
  // d/dx (1/(2 gamma_f)) sum pf^2 / w(x) = sum_k c_k dw_k/dx
  const Eigen::VectorXd coeffs = -(pf.array().square() * inv.array().square()) / (2.0 * gamma_f);
  if (coeffs.cwiseAbs().maxCoeff() > 0.0) vp -= grad_mass_weights(x, cells, coeffs);
}

}  // namespace

DeformationKernelConfig DeformationKernelConfig::from_scales(std::vector<double> scales) {
  DeformationKernelConfig cfg;
  cfg.weights.assign(scales.size(), scales.empty() ? 0.0 : 1.0 / static_cast<double>(scales.size()));
  cfg.scales = std::move(scales);
  return cfg;
}

void DeformationKernelConfig::validate() const {
  if (scales.empty()) throw ValidationError("deformation kernel needs at least one scale");
  if (weights.size() != scales.size()) throw ValidationError("deformation kernel needs one weight per scale");
  for (std::size_t s = 0; s < scales.size(); ++s) {
    if (!(scales[s] > 0.0) || !std::isfinite(scales[s]) || !(weights[s] > 0.0) || !std::isfinite(weights[s])) {
      throw ValidationError("deformation kernel scales and weights must be positive and finite");
    }
  }
}

double kernel_V(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const DeformationKernelConfig& cfg) {
  const double sq = (a - b).squaredNorm();
  double k = 0.0;
  for (std::size_t s = 0; s < cfg.scales.size(); ++s) k += cfg.weights[s] * std::exp(-sq / (cfg.scales[s] * cfg.scales[s]));
  return k;
}

Eigen::VectorXd velocity_field(const Points& x, const Points& p, const Eigen::VectorXd& query,
                               const DeformationKernelConfig& cfg, double gamma) {
  check_state(x, p);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.cols());
  for (Index k = 0; k < x.rows(); ++k) v += kernel_V(query, x.row(k).transpose(), cfg) * p.row(k).transpose();
  return v / gamma;
}

double hamiltonian_geo(const Points& x, const Points& p, const DeformationKernelConfig& cfg, double gamma) {
  check_state(x, p);
  const Index P = x.rows();
  Eigen::VectorXd rows(P);
#pragma omp parallel
  {
    KernelRow row;
    Eigen::ArrayXd pp;
#pragma omp for schedule(static)
    for (Index k = 0; k < P; ++k) {
      row.compute(x, k, cfg, false);
      pp.setZero(P);
      for (Index c = 0; c < x.cols(); ++c) pp += p.col(c).array() * p(k, c);
      rows(k) = (row.K * pp).sum();
    }
  }
  return detail::compensated_sum(rows) / (2.0 * gamma);
}

Points hamiltonian_geo_dp(const Points& x, const Points& p, const DeformationKernelConfig& cfg, double gamma) {
  check_state(x, p);
  Points vx, vp;
  hamiltonian_field(x, p, cfg, gamma, vx, vp);
  return vx;
}

Points hamiltonian_geo_dx(const Points& x, const Points& p, const DeformationKernelConfig& cfg, double gamma) {
  check_state(x, p);
  Points vx, vp;
  hamiltonian_field(x, p, cfg, gamma, vx, vp);
  return -vp;
}

double hamiltonian_geofun(const Eigen::VectorXd& pf, const MassMatrix& mass, double gamma_f) {
  if (pf.size() != mass.weights.size()) throw ValidationError("signal momentum length does not match vertex count");
  const Eigen::VectorXd inv = inverse_mass(mass, pf);
  return (pf.array().square() * inv.array()).sum() / (2.0 * gamma_f);
}

double hamiltonian_metamorphosis(const Points& x, const Points& p, const Signal& pf, const Cells& cells,
                                 const DeformationKernelConfig& cfg, double gamma_V, double gamma_f) {
  return hamiltonian_geo(x, p, cfg, gamma_V) + hamiltonian_geofun(pf, mass_matrix(x, cells), gamma_f);
}

ShootState shoot_tangential(const Points& x0, const Points& p0, const Signal& f0, const Signal& zeta,
                            const DeformationKernelConfig& cfg, double gamma_V, int nsteps) {
  check_state(x0, p0);
  cfg.validate();
  if (nsteps < 1) throw ValidationError("nsteps must be at least 1");
  if (f0.size() != x0.rows() || zeta.size() != x0.rows()) throw ValidationError("signal length does not match particle count");
  ShootState out;
  integrate_tangential(x0, p0, cfg, gamma_V, nsteps, &out.positions, &out.momenta, nullptr);
  for (int i = 0; i <= nsteps; ++i) out.signals.push_back(f0 + out.time(i) * zeta);
  return out;
}

ShootState shoot_metamorphosis(const Points& x0, const Points& p0, const Signal& f0, const Signal& pf0,
                               const Cells& cells, const DeformationKernelConfig& cfg, double gamma_V,
                               double gamma_f, int nsteps) {
  check_state(x0, p0);
  cfg.validate();
  if (nsteps < 1) throw ValidationError("nsteps must be at least 1");
  if (f0.size() != x0.rows() || pf0.size() != x0.rows()) throw ValidationError("signal length does not match particle count");
  const double h = 1.0 / nsteps;
  ShootState out;
  Points x = x0, p = p0;
  Signal f = f0;
  Points k1x, k1p, k2x, k2p, k3x, k3p, k4x, k4p;
  Signal k1f, k2f, k3f, k4f;
  out.positions.push_back(x);
  out.momenta.push_back(p);
  out.signals.push_back(f);
  out.signal_momenta.push_back(pf0);
  for (int i = 0; i < nsteps; ++i) {
    metamorphosis_field(x, p, pf0, cells, cfg, gamma_V, gamma_f, k1x, k1p, k1f);
    metamorphosis_field(x + 0.5 * h * k1x, p + 0.5 * h * k1p, pf0, cells, cfg, gamma_V, gamma_f, k2x, k2p, k2f);
    metamorphosis_field(x + 0.5 * h * k2x, p + 0.5 * h * k2p, pf0, cells, cfg, gamma_V, gamma_f, k3x, k3p, k3f);
    metamorphosis_field(x + h * k3x, p + h * k3p, pf0, cells, cfg, gamma_V, gamma_f, k4x, k4p, k4f);
    x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    p += (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    f += (h / 6.0) * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
    check_finite(x, p, i + 1);
    if (!f.allFinite()) throw DivergenceError("signal diverged at step " + std::to_string(i + 1), i + 1);
    out.positions.push_back(x);
    out.momenta.push_back(p);
    out.signals.push_back(f);
    out.signal_momenta.push_back(pf0);
  }
  return out;
}

void hamiltonian_field_vjp(const Points& x, const Points& p, const Points& ax, const Points& ap,
                           const DeformationKernelConfig& cfg, double gamma, Points& out_x, Points& out_p) {
  const Index P = x.rows();
  const int n = static_cast<int>(x.cols());
  out_x.resize(P, n);
  out_p.resize(P, n);
  const double inv_gamma = 1.0 / gamma;
  // phi = <ax, dH/dp> - <ap, dH/dx>; returns (dphi/dx, dphi/dp).
#pragma omp parallel
  {
    KernelRow row;
    Eigen::ArrayXd a_mp, p_ma, pp, bx, coef_x, coef_b, coef_p;
#pragma omp for schedule(static)
    for (Index m = 0; m < P; ++m) {
      row.compute(x, m, cfg, true);
      a_mp.setZero(P);
      p_ma.setZero(P);
      pp.setZero(P);
      bx.setZero(P);
      for (int c = 0; c < n; ++c) {
        a_mp += p.col(c).array() * ax(m, c);
        p_ma += ax.col(c).array() * p(m, c);
        pp += p.col(c).array() * p(m, c);
        bx += (ap(m, c) - ap.col(c).array()) * (x(m, c) - x.col(c).array());
      }
      coef_x = (a_mp + p_ma) * row.D - pp * row.E * bx;
      coef_b = pp * row.D;
      coef_p = row.D * bx;
      const double sx = coef_x.sum();
      const double sb = coef_b.sum();
      for (int c = 0; c < n; ++c) {
        const double gx = x(m, c) * sx - (coef_x * x.col(c).array()).sum() -
                          (ap(m, c) * sb - (coef_b * ap.col(c).array()).sum());
        out_x(m, c) = inv_gamma * gx;
        out_p(m, c) = inv_gamma * ((row.K * ax.col(c).array()).sum() - (coef_p * p.col(c).array()).sum());
      }
    }
  }
}

AdjointGradient adjoint_gradient(const Points& x0, const Points& p0, const Points& terminal_grad_x,
                                 const Points& terminal_grad_p, const DeformationKernelConfig& cfg, double gamma_V,
                                 int nsteps) {
  check_state(x0, p0);
  cfg.validate();
  if (nsteps < 1) throw ValidationError("nsteps must be at least 1");
  if (terminal_grad_x.rows() != x0.rows() || terminal_grad_x.cols() != x0.cols() ||
      terminal_grad_p.rows() != x0.rows() || terminal_grad_p.cols() != x0.cols()) {
    throw ValidationError("terminal gradient shape does not match the trajectory");
  }
  std::vector<std::array<Stage, 4>> stages;
  integrate_tangential(x0, p0, cfg, gamma_V, nsteps, nullptr, nullptr, &stages);

  const double h = 1.0 / nsteps;
  Points lx = terminal_grad_x, lp = terminal_grad_p;
  Points m4x, m4p, m3x, m3p, m2x, m2p, m1x, m1p;
  for (int i = nsteps - 1; i >= 0; --i) {
    const auto& st = stages[static_cast<std::size_t>(i)];
    hamiltonian_field_vjp(st[3].x, st[3].p, (h / 6.0) * lx, (h / 6.0) * lp, cfg, gamma_V, m4x, m4p);
    hamiltonian_field_vjp(st[2].x, st[2].p, (h / 3.0) * lx + h * m4x, (h / 3.0) * lp + h * m4p, cfg, gamma_V, m3x, m3p);
    hamiltonian_field_vjp(st[1].x, st[1].p, (h / 3.0) * lx + 0.5 * h * m3x, (h / 3.0) * lp + 0.5 * h * m3p, cfg,
                          gamma_V, m2x, m2p);
    hamiltonian_field_vjp(st[0].x, st[0].p, (h / 6.0) * lx + 0.5 * h * m2x, (h / 6.0) * lp + 0.5 * h * m2p, cfg,
                          gamma_V, m1x, m1p);
    lx += m1x + m2x + m3x + m4x;
    lp += m1p + m2p + m3p + m4p;
  }
  return {lx, lp};
}

Eigen::VectorXd time_quadrature_weights(Index nodes) {
  if (nodes < 2) throw ValidationError("time quadrature needs at least 2 nodes");
  const double h = 1.0 / static_cast<double>(nodes - 1);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(nodes, h);
  w(0) = w(nodes - 1) = 0.5 * h;
  if (nodes >= 3) {
    // Euler-Maclaurin end correction with one-sided second order differences.
    const double c = h / 24.0;
    w(0) -= 3.0 * c;
    w(1) += 4.0 * c;
    w(2) -= c;
    w(nodes - 1) -= 3.0 * c;
    w(nodes - 2) += 4.0 * c;
    w(nodes - 3) -= c;
  }
  return w;
}

Eigen::MatrixXd optimal_h_star(const Signal& zeta1, const Eigen::MatrixXd& jacobians) {
  if (jacobians.rows() != zeta1.size()) throw ValidationError("one Jacobian row per vertex expected");
  if (!(jacobians.array() > 0.0).all()) throw ValidationError("Jacobians must be positive");
  const Eigen::VectorXd w = time_quadrature_weights(jacobians.cols());
  const Eigen::ArrayXXd inv = jacobians.array().inverse();
  const Eigen::VectorXd C = (inv.matrix() * w).cwiseInverse();
  return (inv.colwise() * (C.array() * zeta1.array())).matrix();
}

}  // namespace fshapes
