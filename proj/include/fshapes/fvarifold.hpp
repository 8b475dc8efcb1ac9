#pragma once

#include "fshapes/mesh.hpp"

#include <optional>

namespace fshapes {

/// Widths of the tensor Gaussian kernel k_e * k_t * k_f.
struct KernelConfig {
  double sigma_e = 1.0;  // length units
  double sigma_t = 1.0;  // dimensionless
  double sigma_f = 1.0;  // signal units

  void validate() const;
};

double kernel_e(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, const KernelConfig& cfg);
/// Unoriented: depends on <V1,V2>^2 only. Throws ValidationError on non-unit input.
double kernel_t(const Eigen::VectorXd& v1, const Eigen::VectorXd& v2, const KernelConfig& cfg);
double kernel_f(double f1, double f2, const KernelConfig& cfg);

/// sum_l sum_l' r_l s_l' k_e k_t k_f. Rows are summed independently and then
/// combined with compensated summation in index order, so the result does not
/// depend on the number of threads.
double inner_product(const DiracSet& a, const DiracSet& b, const KernelConfig& cfg);

struct AttachmentValue {
  double value = 0.0;  // <a,a> - 2<a,b> + <b,b>, clamped at 0
  double aa = 0.0;
  double ab = 0.0;
  double bb = 0.0;
};

AttachmentValue squared_distance(const DiracSet& a, const DiracSet& b, const KernelConfig& cfg);

struct AttachmentGradient {
  double value = 0.0;
  Points grad_x;   // d g / d vertex positions
  Signal grad_f;   // d g / d vertex signal (equals the residual gradient)
};

/// Squared distance between the mesh (template vertices, signal + residual)
/// and `target`, with its exact gradient through the Dirac formulas.
AttachmentGradient grad_attachment(const FShapeMesh& templ, const Signal& residual, const DiracSet& target,
                                   const KernelConfig& cfg);

/// Same, for explicit vertex positions / signal sharing `cells`. Pass the
/// precomputed <target,target> to skip recomputing it.
AttachmentGradient attachment_gradient(const Points& x, const Signal& f, const Cells& cells, const DiracSet& target,
                                       const KernelConfig& cfg, std::optional<double> target_self = std::nullopt);

/// Value only, matching attachment_gradient().value.
double attachment_value(const Points& x, const Signal& f, const Cells& cells, const DiracSet& target,
                        const KernelConfig& cfg, std::optional<double> target_self = std::nullopt);

/// Chain rule from per-Dirac derivatives (center, unconstrained direction,
/// mean signal, weight) to vertex positions and signal values.
void scatter_dirac_gradient(const Points& x, const Cells& cells, const DiracSet& diracs, const Points& g_center,
                            const Points& g_direction, const Eigen::VectorXd& g_signal,
                            const Eigen::VectorXd& g_weight, Points& grad_x, Signal& grad_f);

}  // namespace fshapes
