#include "sepca/fb_basis.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "sepca/errors.hpp"

namespace sepca {
namespace {
constexpr double kPi = std::numbers::pi;

int ceil_tol(double v) { return int(std::ceil(v - 1e-9)); }
}  // namespace

void validate(const BasisParams& p) {
  if (!(p.c > 0.0 && p.c <= 0.5)) throw std::invalid_argument("band limit c must lie in (0, 0.5]");
  if (p.L < 2 || p.L % 2) throw std::invalid_argument("image size L must be even");
  if (p.R < 1 || 2 * p.R > p.L) throw std::invalid_argument("support radius R must lie in [1, L/2]");
}

FbBasis::FbBasis(const BasisParams& params, int radial_oversample) : params_(params) {
  validate(params);
  if (radial_oversample < 1) throw std::invalid_argument("radial_oversample must be >= 1");
  const double bound = 2.0 * kPi * params.c * params.R;
  // Keep (k,q) only when the next root R_{k,q+1} is still below 2 pi c R.
  for (int k = 0;; ++k) {
    auto r = bessel_roots(k, bound);
    if (r.size() < 2) break;
    r.pop_back();
    roots_.push_back(std::move(r));
  }
  if (roots_.empty())
    throw EmptyBasisError("no Fourier-Bessel functions satisfy the sampling criterion for c=" +
                          std::to_string(params.c) + ", R=" + std::to_string(params.R));
  for (int k = 0; k < int(roots_.size()); ++k) {
    p_.push_back(int(roots_[k].size()));
    offset_.push_back(half_dim_);
    half_dim_ += p_.back();
    std::vector<double> jn;
    for (int q = 0; q < p_.back(); ++q) {
      jn.push_back(bessel_j(k + 1, roots_[k][q]));
      index_.emplace_back(k, q);
    }
    jnext_.push_back(std::move(jn));
  }
  const int n_xi = ceil_tol(4.0 * params.c * params.R);
  n_theta_ = ceil_tol(16.0 * params.c * params.R);
  xi_rule_ = gauss_legendre(n_xi, 0.0, params.c);
  r_rule_ = gauss_legendre(n_xi * radial_oversample, 0.0, double(params.R));
}

int FbBasis::p(int k) const {
  k = std::abs(k);
  return k <= k_max() ? p_[k] : 0;
}

int FbBasis::total_dim() const {
  int t = p_[0];
  for (int k = 1; k <= k_max(); ++k) t += 2 * p_[k];
  return t;
}

void FbBasis::check_index(int k, int q) const {
  if (std::abs(k) > k_max() || q < 0 || q >= p(k))
    throw std::out_of_range("basis index (" + std::to_string(k) + "," + std::to_string(q) + ") not in basis");
}

double FbBasis::root(int k, int q) const {
  check_index(k, q);
  return roots_[std::abs(k)][q];
}

double FbBasis::normalizer(int k, int q) const {
  check_index(k, q);
  return 1.0 / (params_.c * std::sqrt(kPi) * std::abs(jnext_[std::abs(k)][q]));
}

double FbBasis::profile_from(int k, int q, double jk, double r) const {
  const double c = params_.c;
  const double rk = roots_[k][q];
  const double z = 2.0 * kPi * c * r;
  const double d = z - rk;
  const double sign = (q % 2 == 0) ? -1.0 : 1.0;  // (-1)^q for 1-based q
  double ratio;
  if (std::abs(d) < 1e-4) {
    // Taylor expansion of J_k about its root; J_k' = -J_{k+1} there.
    const double jp = -jnext_[k][q];
    const double s = 1.0 - d / (2.0 * rk) + d * d * (2.0 - rk * rk + double(k) * k) / (6.0 * rk * rk);
    ratio = jp * s / (z + rk);
  } else {
    ratio = jk / (z * z - rk * rk);
  }
  return 2.0 * c * std::sqrt(kPi) * sign * rk * ratio;
}

double FbBasis::radial_profile(int k, int q, double r) const {
  check_index(k, q);
  k = std::abs(k);
  return profile_from(k, q, bessel_j(k, 2.0 * kPi * params_.c * r), r);
}

std::complex<double> FbBasis::radial_function(int k, int q, double r) const {
  const double h = radial_profile(k, q, r);
  static const std::complex<double> ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const auto phase = ipow[std::abs(k) % 4];
  return k >= 0 ? phase * h : std::conj(phase) * h;
}

std::vector<double> FbBasis::radial_profiles(double r) const {
  const auto j = bessel_j_all(k_max(), 2.0 * kPi * params_.c * r);
  std::vector<double> out;
  out.reserve(index_.size());
  for (auto [k, q] : index_) out.push_back(profile_from(k, q, j[k], r));
  return out;
}

}  // namespace sepca
