#pragma once

#include "fshapes/mesh.hpp"

#include <vector>

namespace fshapes {

/// Scalar deformation kernel K_V(a, b) = sum_s w_s exp(-|a-b|^2 / sigma_s^2).
struct DeformationKernelConfig {
  std::vector<double> scales;
  std::vector<double> weights;

  /// Equal weights over the given scales.
  static DeformationKernelConfig from_scales(std::vector<double> scales);
  void validate() const;
};

double kernel_V(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const DeformationKernelConfig& cfg);

/// v(query) = (1/gamma) sum_k K_V(query, x_k) p_k
Eigen::VectorXd velocity_field(const Points& x, const Points& p, const Eigen::VectorXd& query,
                               const DeformationKernelConfig& cfg, double gamma);

/// (1/(2 gamma)) (K_xx p | p)
double hamiltonian_geo(const Points& x, const Points& p, const DeformationKernelConfig& cfg, double gamma);

/// dH/dp = (1/gamma) K_xx p, i.e. the velocity at every particle.
Points hamiltonian_geo_dp(const Points& x, const Points& p, const DeformationKernelConfig& cfg, double gamma);
/// dH/dx.
Points hamiltonian_geo_dx(const Points& x, const Points& p, const DeformationKernelConfig& cfg, double gamma);

/// (1/(2 gamma_f)) sum_k pf_k^2 / w_k. Throws SingularMassError when a
/// vertex with zero mass carries nonzero signal momentum.
double hamiltonian_geofun(const Eigen::VectorXd& pf, const MassMatrix& mass, double gamma_f);

/// Samples of a geodesic on the uniform grid t_i = i / nsteps.
struct ShootState {
  std::vector<Points> positions;
  std::vector<Points> momenta;
  std::vector<Signal> signals;
  std::vector<Signal> signal_momenta;  // metamorphosis only

  int nsteps() const { return static_cast<int>(positions.size()) - 1; }
  double time(int i) const { return static_cast<double>(i) / nsteps(); }
};

/// Tangential model: RK4 on the geometric Hamiltonian, f(t) = f0 + t zeta.
ShootState shoot_tangential(const Points& x0, const Points& p0, const Signal& f0, const Signal& zeta,
                            const DeformationKernelConfig& cfg, double gamma_V, int nsteps);

/// Metamorphosis model: the lumped mass D(x) is recomputed from the current
/// positions at every RK4 stage; the signal momentum stays constant.
ShootState shoot_metamorphosis(const Points& x0, const Points& p0, const Signal& f0, const Signal& pf0,
                               const Cells& cells, const DeformationKernelConfig& cfg, double gamma_V,
                               double gamma_f, int nsteps);

/// Full reduced Hamiltonian of the metamorphosis model.
double hamiltonian_metamorphosis(const Points& x, const Points& p, const Signal& pf, const Cells& cells,
                                 const DeformationKernelConfig& cfg, double gamma_V, double gamma_f);

struct AdjointGradient {
  Points grad_x0;
  Points grad_p0;
};

/**
 * Pulls the gradient (dG/dx(1), dG/dp(1)) of a terminal functional back to
 * the initial state (x0, p0) of the tangential geodesic.
 *
 * The backward sweep is the exact transpose of the forward RK4 steps, so the
 * result is the gradient of the discrete shooting map itself.
 */
AdjointGradient adjoint_gradient(const Points& x0, const Points& p0, const Points& terminal_grad_x,
                                 const Points& terminal_grad_p, const DeformationKernelConfig& cfg, double gamma_V,
                                 int nsteps);

/// Transposed Jacobian of the Hamiltonian vector field (dH/dp, -dH/dx) at
/// (x, p) applied to (ax, ap). Exposed for testing.
void hamiltonian_field_vjp(const Points& x, const Points& p, const Points& ax, const Points& ap,
                           const DeformationKernelConfig& cfg, double gamma, Points& out_x, Points& out_p);

/**
 * Optimal signal speed for a prescribed total change zeta1 under a moving
 * L2 metric with Jacobians J(x, t):  h*_t = C zeta1 / J_t with
 * C = (int_0^1 ds / J_s)^{-1}.
 *
 * `jacobians` has one row per vertex and one column per node of a uniform
 * grid on [0, 1]. Time integrals use time_quadrature_weights().
 */
Eigen::MatrixXd optimal_h_star(const Signal& zeta1, const Eigen::MatrixXd& jacobians);

/// Trapezoidal weights with Gregory end corrections (fourth order, exact
/// for cubics) on `nodes` uniform nodes over [0, 1]. Three nodes give
/// Simpson's rule, two the plain trapezoid.
Eigen::VectorXd time_quadrature_weights(Index nodes);

}  // namespace fshapes
