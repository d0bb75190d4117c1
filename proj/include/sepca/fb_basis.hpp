#pragma once

#include <complex>
#include <utility>
#include <vector>

#include "sepca/bessel.hpp"

namespace sepca {

struct BasisParams {
  double c = 0.15;  // band limit, cycles per pixel
  int R = 14;       // support radius, pixels
  int L = 32;       // image side, pixels
};

void validate(const BasisParams& p);

// Truncated Fourier-Bessel basis. Radial index q is 0-based throughout the code.
class FbBasis {
 public:
  // radial_oversample multiplies the node count of the real-domain radial rule.
  explicit FbBasis(const BasisParams& params, int radial_oversample = 4);

  const BasisParams& params() const { return params_; }
  int k_max() const { return int(p_.size()) - 1; }
  int p(int k) const;
  // sum of p_k over k = -k_max..k_max
  int total_dim() const;
  // sum of p_k over k = 0..k_max; the row count of stacked coefficient blocks
  int half_dim() const { return half_dim_; }
  int offset(int k) const { return offset_[k]; }
  const std::vector<std::pair<int, int>>& index() const { return index_; }

  double root(int k, int q) const;
  double normalizer(int k, int q) const;
  const QuadratureRule& xi_rule() const { return xi_rule_; }
  const QuadratureRule& r_rule() const { return r_rule_; }
  int n_xi() const { return int(xi_rule_.nodes.size()); }
  int n_theta() const { return n_theta_; }

  // Real radial profile h_{k,q}(r); the complex radial function is i^k h.
  double radial_profile(int k, int q, double r) const;
  std::complex<double> radial_function(int k, int q, double r) const;
  // h_{k,q}(r) for every (k >= 0, q) in index() order.
  std::vector<double> radial_profiles(double r) const;

 private:
  double profile_from(int k, int q, double jk, double r) const;
  void check_index(int k, int q) const;

  BasisParams params_;
  std::vector<int> p_;
  std::vector<int> offset_;
  int half_dim_ = 0;
  std::vector<std::vector<double>> roots_;
  std::vector<std::vector<double>> jnext_;  // J_{k+1}(R_{k,q})
  std::vector<std::pair<int, int>> index_;
  QuadratureRule xi_rule_;
  QuadratureRule r_rule_;
  int n_theta_ = 0;
};

}  // namespace sepca
