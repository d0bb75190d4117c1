#include "lp.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sepca/errors.hpp"

namespace sepca::detail {

Eigen::VectorXd simplex_max(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  const long m = A.rows(), n = A.cols();
  if (b.size() != m || c.size() != n) throw std::invalid_argument("simplex: dimension mismatch");
  if ((b.array() < 0).any()) throw std::invalid_argument("simplex: right-hand side must be non-negative");
  constexpr double eps = 1e-12;
  // x_B = rhs - T x_N ; z = z0 + obj^T x_N. Variables 0..n-1 are structural, n.. are slacks.
  Eigen::MatrixXd T = A;
  Eigen::VectorXd rhs = b, obj = c;
  std::vector<long> nonbasic(n), basic(m);
  for (long j = 0; j < n; ++j) nonbasic[j] = j;
  for (long i = 0; i < m; ++i) basic[i] = n + i;

  for (long iter = 0; iter < 100000; ++iter) {
    long enter = -1;
    for (long j = 0; j < n; ++j)
      if (obj(j) > eps && (enter < 0 || nonbasic[j] < nonbasic[enter])) enter = j;
    if (enter < 0) break;
    long leave = -1;
    double best = std::numeric_limits<double>::infinity();
    const double col_tol = 1e-9 * std::max(1.0, T.col(enter).cwiseAbs().maxCoeff());
    for (long i = 0; i < m; ++i) {
      if (T(i, enter) <= col_tol) continue;
      const double ratio = std::max(rhs(i), 0.0) / T(i, enter);
      if (leave < 0 || ratio < best - 1e-13 * (1.0 + best)) {
        best = ratio;
        leave = i;
      } else if (ratio <= best + 1e-13 * (1.0 + best) && T(i, enter) > T(leave, enter)) {
        leave = i;  // prefer the larger pivot among ties
      }
    }
    if (leave < 0) throw NumericalError("simplex: problem is unbounded");
    const double piv = T(leave, enter);
    rhs(leave) /= piv;
    T.row(leave) /= piv;
    T(leave, enter) = 1.0 / piv;
    for (long i = 0; i < m; ++i) {
      if (i == leave) continue;
      const double f = T(i, enter);
      if (f == 0.0) continue;
      rhs(i) -= f * rhs(leave);
      T.row(i) -= f * T.row(leave);
      T(i, enter) = -f / piv;
    }
    const double f = obj(enter);
    obj -= f * T.row(leave).transpose();
    obj(enter) = -f / piv;
    std::swap(nonbasic[enter], basic[leave]);
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (long i = 0; i < m; ++i)
    if (basic[i] < n) x(basic[i]) = std::max(rhs(i), 0.0);
  const double scale = 1.0 + b.cwiseAbs().maxCoeff();
  if ((A * x - b).maxCoeff() > 1e-8 * scale) throw NumericalError("simplex: solution lost feasibility");
  return x;
}

}  // namespace sepca::detail
