#include "sepca/bessel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sepca {
namespace {

constexpr double kSeriesMax = 2.0;

double series(int k, double x) {
  const double h = 0.5 * x;
  const double h2 = h * h;
  double term = 1.0;
  for (int i = 1; i <= k; ++i) term *= h / i;
  double sum = term;
  for (int m = 1; m < 200; ++m) {
    term *= -h2 / (double(m) * double(m + k));
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

// Miller's backward recurrence, normalised by J_0 + 2 sum J_{2m} = 1.
std::vector<double> miller(int kmax, double x) {
  const double big = std::max<double>(kmax, x);
  int start = int(big + 30.0 + 6.0 * std::cbrt(big));
  start += start % 2;
  std::vector<double> out(kmax + 1, 0.0);
  double jp = 0.0, j = 1e-300, norm = 0.0;
  for (int m = start; m >= 1; --m) {
    const double jm = 2.0 * m / x * j - jp;
    jp = j;
    j = jm;
    // j now holds the unnormalised J_{m-1}
    if (m - 1 <= kmax) out[m - 1] = j;
    if ((m - 1) % 2 == 0 && m - 1 > 0) norm += 2.0 * j;
    if (std::abs(j) > 1e250) {
      j *= 1e-250;
      jp *= 1e-250;
      norm *= 1e-250;
      for (auto& v : out) v *= 1e-250;
    }
  }
  norm += j;
  for (auto& v : out) v /= norm;
  return out;
}

void check_finite(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("bessel: non-finite argument");
}

}  // namespace

std::vector<double> bessel_j_all(int kmax, double x) {
  check_finite(x);
  if (kmax < 0) throw std::invalid_argument("bessel: negative order");
  const double ax = std::abs(x);
  std::vector<double> out(kmax + 1, 0.0);
  if (ax == 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (ax <= kSeriesMax) {
    for (int k = 0; k <= kmax; ++k) out[k] = series(k, ax);
  } else {
    out = miller(kmax, ax);
  }
  if (x < 0)
    for (int k = 1; k <= kmax; k += 2) out[k] = -out[k];
  return out;
}

double bessel_j(int order, double x) {
  check_finite(x);
  if (order < 0) throw std::invalid_argument("bessel: negative order");
  const double ax = std::abs(x);
  double v;
  if (ax == 0.0)
    v = order == 0 ? 1.0 : 0.0;
  else if (ax <= kSeriesMax)
    v = series(order, ax);
  else
    v = miller(order, ax)[order];
  return (x < 0 && order % 2) ? -v : v;
}

std::vector<double> bessel_roots(int order, double upper_bound) {
  if (order < 0) throw std::invalid_argument("bessel_roots: negative order");
  std::vector<double> roots;
  if (!(upper_bound > 0)) return roots;
  // every root of J_k exceeds k, and consecutive roots are more than pi apart
  const double step = std::numbers::pi / 4;
  double a = order > 0 ? double(order) : 0.5;
  double fa = bessel_j(order, a);
  while (a < upper_bound) {
    double b = std::min(a + step, upper_bound);
    double fb = bessel_j(order, b);
    if (fb == 0.0) {
      roots.push_back(b);
    } else if ((fa < 0) != (fb < 0) && fa != 0.0) {
      double lo = a, hi = b, flo = fa;
      for (int it = 0; it < 200 && hi - lo > 4e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = bessel_j(order, mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm < 0) == (flo < 0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    a = b;
    fa = fb;
  }
  return roots;
}

BesselRootTable bessel_root_table(double threshold) {
  BesselRootTable t;
  t.threshold = threshold;
  for (int k = 0;; ++k) {
    auto r = bessel_roots(k, threshold);
    if (r.empty()) break;
    t.roots.push_back(std::move(r));
  }
  t.max_order = int(t.roots.size()) - 1;
  return t;
}

QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one node");
  if (!(a < b)) throw std::invalid_argument("gauss_legendre: require a < b");
  QuadratureRule q;
  q.a = a;
  q.b = b;
  q.nodes.resize(n);
  q.weights.resize(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute the derivative at the converged node
    {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    q.nodes[i] = mid - half * z;
    q.nodes[n - 1 - i] = mid + half * z;
    q.weights[i] = q.weights[n - 1 - i] = half * w;
  }
  if (n % 2 == 1) q.nodes[n / 2] = mid;
  return q;
}

}  // namespace sepca
