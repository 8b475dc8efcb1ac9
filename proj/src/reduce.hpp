#pragma once

#include <Eigen/Core>

#include <cmath>

namespace fshapes::detail {

/// Neumaier compensated sum, in index order.
inline double compensated_sum(const Eigen::Ref<const Eigen::VectorXd>& v) {
  double sum = 0.0;
  double comp = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double t = sum + v(i);
    if (std::abs(sum) >= std::abs(v(i))) {
      comp += (sum - t) + v(i);
    } else {
      comp += (v(i) - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

}  // namespace fshapes::detail
