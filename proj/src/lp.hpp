#pragma once

#include <Eigen/Dense>

namespace sepca::detail {

// maximise c^T x subject to A x <= b, x >= 0, with b >= 0 (the origin is feasible).
// Dictionary simplex with Bland's rule. Throws NumericalError if unbounded.
Eigen::VectorXd simplex_max(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

}  // namespace sepca::detail
