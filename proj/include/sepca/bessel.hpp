#pragma once

#include <vector>

namespace sepca {

// J_k(x) for integer k >= 0. Negative x is accepted through J_k(-x) = (-1)^k J_k(x).
double bessel_j(int order, double x);

// J_0(x), ..., J_kmax(x) from a single recurrence pass.
std::vector<double> bessel_j_all(int kmax, double x);

// Positive roots of J_order in (0, upper_bound], ascending.
std::vector<double> bessel_roots(int order, double upper_bound);

struct BesselRootTable {
  int max_order = -1;
  double threshold = 0.0;
  std::vector<std::vector<double>> roots;  // roots[k] ascending
};

// Roots of J_0, J_1, ... up to threshold, stopping at the first order with none.
BesselRootTable bessel_root_table(double threshold);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  double a = 0.0;
  double b = 0.0;
};

QuadratureRule gauss_legendre(int n_points, double a, double b);

}  // namespace sepca
