#include "fshapes/fvarifold.hpp"

#include "fshapes/errors.hpp"
#include "reduce.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <string>

namespace fshapes {

namespace {

struct Scales {
  double inv_e;  // 1/sigma_e^2
  double inv_t;  // 2/sigma_t^2
  double inv_f;  // 1/sigma_f^2

  explicit Scales(const KernelConfig& cfg)
      : inv_e(1.0 / (cfg.sigma_e * cfg.sigma_e)),
        inv_t(2.0 / (cfg.sigma_t * cfg.sigma_t)),
        inv_f(1.0 / (cfg.sigma_f * cfg.sigma_f)) {}
};

/// Row l of the tensor kernel against every Dirac of `b`. Leaves the cosines
/// <V_l, W_m> in `cosv` and the kernel values in `k`.
void kernel_row(const DiracSet& b, const DiracSet& a, Index l, const Scales& s, Eigen::ArrayXd& k,
                Eigen::ArrayXd& cosv) {
  const int n = b.ambient_dim();
  k.setZero(b.size());
  cosv.setZero(b.size());
  for (int c = 0; c < n; ++c) {
    k += (b.centers.col(c).array() - a.centers(l, c)).square();
    cosv += b.directions.col(c).array() * a.directions(l, c);
  }
  k = -s.inv_e * k - s.inv_t * (1.0 - cosv.square()) - s.inv_f * (b.mean_signals.array() - a.mean_signals(l)).square();
  k = k.exp();
}

void check_compatible(const DiracSet& a, const DiracSet& b) {
  if (a.ambient_dim() != b.ambient_dim() || a.cell_dim != b.cell_dim) {
    throw ValidationError("Dirac sets differ in dimension: (d=" + std::to_string(a.cell_dim) +
                          ", n=" + std::to_string(a.ambient_dim()) + ") vs (d=" + std::to_string(b.cell_dim) +
                          ", n=" + std::to_string(b.ambient_dim()) + ")");
  }
}

double clamp_distance(double value, double aa, double bb) {
  if (value >= 0.0) return value;
  if (-value <= 1e-10 * (aa + bb) || (aa + bb) == 0.0) return 0.0;
  throw NumericalError("squared fvarifold distance is significantly negative: " + std::to_string(value));
}

}  // namespace

void KernelConfig::validate() const {
  for (double s : {sigma_e, sigma_t, sigma_f}) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("kernel widths must be positive and finite");
  }
}

double kernel_e(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, const KernelConfig& cfg) {
  return std::exp(-(x1 - x2).squaredNorm() / (cfg.sigma_e * cfg.sigma_e));
}

double kernel_t(const Eigen::VectorXd& v1, const Eigen::VectorXd& v2, const KernelConfig& cfg) {
  if (std::abs(v1.norm() - 1.0) > 1e-9 || std::abs(v2.norm() - 1.0) > 1e-9) {
    throw ValidationError("kernel_t expects unit vectors");
  }
  const double c = v1.dot(v2);
  return std::exp(-2.0 / (cfg.sigma_t * cfg.sigma_t) * (1.0 - c * c));
}

double kernel_f(double f1, double f2, const KernelConfig& cfg) {
  return std::exp(-(f1 - f2) * (f1 - f2) / (cfg.sigma_f * cfg.sigma_f));
}

double inner_product(const DiracSet& a, const DiracSet& b, const KernelConfig& cfg) {
  check_compatible(a, b);
  cfg.validate();
  const Scales s(cfg);
  Eigen::VectorXd rows(a.size());
#pragma omp parallel
  {
    Eigen::ArrayXd k, cosv;
#pragma omp for schedule(static)
    for (Index l = 0; l < a.size(); ++l) {
      if (a.weights(l) == 0.0) {
        rows(l) = 0.0;
        continue;
      }
      kernel_row(b, a, l, s, k, cosv);
      rows(l) = a.weights(l) * (b.weights.array() * k).sum();
    }
  }
  return detail::compensated_sum(rows);
}

AttachmentValue squared_distance(const DiracSet& a, const DiracSet& b, const KernelConfig& cfg) {
  AttachmentValue out;
  out.aa = inner_product(a, a, cfg);
  out.ab = inner_product(a, b, cfg);
  out.bb = inner_product(b, b, cfg);
  out.value = clamp_distance(out.aa - 2.0 * out.ab + out.bb, out.aa, out.bb);
  return out;
}

void scatter_dirac_gradient(const Points& x, const Cells& cells, const DiracSet& diracs, const Points& g_center,
                            const Points& g_direction, const Eigen::VectorXd& g_signal,
                            const Eigen::VectorXd& g_weight, Points& grad_x, Signal& grad_f) {
  const int n = static_cast<int>(x.cols());
  const int d = static_cast<int>(cells.cols()) - 1;
  const double share = 1.0 / static_cast<double>(d + 1);
  grad_x = Points::Zero(x.rows(), n);
  grad_f = Signal::Zero(x.rows());

  for (Index l = 0; l < cells.rows(); ++l) {
    for (int a = 0; a <= d; ++a) {
      grad_x.row(cells(l, a)) += share * g_center.row(l);
      grad_f(cells(l, a)) += share * g_signal(l);
    }
    // The normalized direction is not differentiable on a collapsed cell:
    // zero subgradient for both weight and direction.
    if (diracs.degenerate[static_cast<std::size_t>(l)]) continue;

    const double r = diracs.weights(l);
    const Eigen::RowVectorXd V = diracs.directions.row(l);
    const Eigen::RowVectorXd gV = g_direction.row(l);
    // Gradient with respect to the unnormalized vector N = r V.
    const Eigen::RowVectorXd gN = g_weight(l) * V + (gV - gV.dot(V) * V) / r;

    if (d == 2) {
      const Eigen::Vector3d x1 = x.row(cells(l, 0)).transpose();
      const Eigen::Vector3d u = x.row(cells(l, 1)).transpose() - x1;
      const Eigen::Vector3d v = x.row(cells(l, 2)).transpose() - x1;
      const Eigen::Vector3d g = gN.transpose();
      const Eigen::Vector3d gu = v.cross(g);
      const Eigen::Vector3d gv = g.cross(u);
      grad_x.row(cells(l, 0)) -= (gu + gv).transpose();
      grad_x.row(cells(l, 1)) += gu.transpose();
      grad_x.row(cells(l, 2)) += gv.transpose();
    } else {
      grad_x.row(cells(l, 1)) += gN;
      grad_x.row(cells(l, 0)) -= gN;
    }
  }
}

AttachmentGradient attachment_gradient(const Points& x, const Signal& f, const Cells& cells, const DiracSet& target,
                                       const KernelConfig& cfg, std::optional<double> target_self) {
  cfg.validate();
  const DiracSet a = to_diracs(x, f, cells);
  check_compatible(a, target);
  const Scales s(cfg);
  const Index T = a.size();
  const int n = a.ambient_dim();

  Points g_center(T, n), g_direction(T, n);
  Eigen::VectorXd g_signal(T), g_weight(T), row_aa(T), row_ab(T);

#pragma omp parallel
  {
    Eigen::ArrayXd ka, ca, kb, cb;
#pragma omp for schedule(static)
    for (Index l = 0; l < T; ++l) {
      kernel_row(a, a, l, s, ka, ca);
      kernel_row(target, a, l, s, kb, cb);
      ka *= a.weights.array();
      kb *= target.weights.array();
      const double sa = ka.sum();
      const double sb = kb.sum();
      const double r = a.weights(l);
      row_aa(l) = r * sa;
      row_ab(l) = r * sb;

      // d<a,a>/d(.)_l = 2 sum_m d_1 k(l, m); d<a,b>/d(.)_l = sum_m d_1 k(l, m)
      g_weight(l) = 2.0 * (sa - sb);
      for (int c = 0; c < n; ++c) {
        const double ma = (ka * a.centers.col(c).array()).sum();
        const double mb = (kb * target.centers.col(c).array()).sum();
        const double diff = (a.centers(l, c) * sa - ma) - (a.centers(l, c) * sb - mb);
        g_center(l, c) = 2.0 * r * (-2.0 * s.inv_e) * diff;
        const double da = (ka * ca * a.directions.col(c).array()).sum();
        const double db = (kb * cb * target.directions.col(c).array()).sum();
        g_direction(l, c) = 2.0 * r * (2.0 * s.inv_t) * (da - db);
      }
      const double fa = (ka * a.mean_signals.array()).sum();
      const double fb = (kb * target.mean_signals.array()).sum();
      const double fl = a.mean_signals(l);
      g_signal(l) = 2.0 * r * (-2.0 * s.inv_f) * ((fl * sa - fa) - (fl * sb - fb));
    }
  }

  const double aa = detail::compensated_sum(row_aa);
  const double ab = detail::compensated_sum(row_ab);
  const double bb = target_self ? *target_self : inner_product(target, target, cfg);

  AttachmentGradient out;
  out.value = clamp_distance(aa - 2.0 * ab + bb, aa, bb);
  scatter_dirac_gradient(x, cells, a, g_center, g_direction, g_signal, g_weight, out.grad_x, out.grad_f);
  return out;
}

double attachment_value(const Points& x, const Signal& f, const Cells& cells, const DiracSet& target,
                        const KernelConfig& cfg, std::optional<double> target_self) {
  const DiracSet a = to_diracs(x, f, cells);
  const double aa = inner_product(a, a, cfg);
  const double ab = inner_product(a, target, cfg);
  const double bb = target_self ? *target_self : inner_product(target, target, cfg);
  return clamp_distance(aa - 2.0 * ab + bb, aa, bb);
}

AttachmentGradient grad_attachment(const FShapeMesh& templ, const Signal& residual, const DiracSet& target,
                                   const KernelConfig& cfg) {
  if (residual.size() != templ.num_vertices()) throw ValidationError("residual length does not match vertex count");
  return attachment_gradient(templ.vertices, templ.signal + residual, templ.cells, target, cfg);
}

}  // namespace fshapes
