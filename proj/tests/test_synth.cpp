#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "sepca/errors.hpp"
#include "sepca/synth.hpp"

using namespace sepca;
using cd = std::complex<double>;

namespace {
constexpr double kPi = std::numbers::pi;

struct Desk {
  FbBasis b{BasisParams{0.15, 14, 32}};
  Transform tf{b};
  GroundTruthModel truth = make_model(desk_preset(), tf);
};

Desk& desk() {
  static Desk d;
  return d;
}
}  // namespace

TEST_CASE("presets") {
  const auto d = desk_preset();
  CHECK(d.params.L == 32);
  CHECK(d.params.R == 14);
  CHECK(d.params.c == 0.15);
  CHECK(d.mean_count == 0.05);
  int total = 0;
  for (int r : d.ranks) total += r;
  CHECK(total == 5);
  const auto p = paper_preset();
  CHECK(p.params.L == 128);
  CHECK(p.params.R == 61);
  CHECK(p.params.c == 0.08);
  CHECK(p.mean_count == 0.01);
  CHECK(preset("desk").params.L == 32);
  CHECK_THROWS_AS(preset("nope"), std::invalid_argument);
}

TEST_CASE("model construction") {
  auto& d = desk();
  CHECK(d.truth.total_rank() == 5);
  CHECK(d.truth.clip_rate <= 0.01);
  const Eigen::VectorXd mu = mean_image(d.truth, d.tf);
  CHECK(mu.minCoeff() >= -1e-12);
  CHECK(mu.mean() == doctest::Approx(0.05).epsilon(1e-10));
  for (const auto& s : d.truth.sigma) {
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    if (s.size()) CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues().minCoeff() >= -1e-14);
  }
  auto cfg = desk_preset();
  cfg.ranks = {9};
  CHECK_THROWS_AS(make_model(cfg, d.tf), std::invalid_argument);
  cfg = desk_preset();
  cfg.snr = 1e4;
  CHECK_THROWS_AS(make_model(cfg, d.tf), DataError);
}

TEST_CASE("zero signal covariance gives the mean image everywhere") {
  auto& d = desk();
  auto flat = d.truth;
  for (auto& s : flat.sigma) s.setZero();
  const auto draw = draw_clean_stack(flat, d.tf, 20, 3);
  const Eigen::VectorXd mu = mean_image(flat, d.tf);
  for (long i = 0; i < 20; ++i) CHECK((draw.images.pixels.col(i) - mu).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(draw.clip_rate == 0.0);
  GroundTruthModel z = flat;
  CHECK(true_covariance(z, d.tf).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(draw_clean_stack(flat, d.tf, 0, 1), std::invalid_argument);
}

TEST_CASE("coefficient law: covariance and rotation phases") {
  auto& d = desk();
  const long n = 100000;
  const auto A = draw_coefficients(d.truth, d.b, n, 11);
  for (int k = 0; k <= d.b.k_max(); ++k) {
    Eigen::MatrixXcd X = A.blocks[k];
    if (k == 0) X.colwise() -= d.truth.mean_coeffs.cast<cd>();
    const Eigen::MatrixXcd C = X * X.adjoint() / double(n);
    const double ref = d.truth.sigma[k].norm();
    if (ref == 0.0) {
      CHECK(C.cwiseAbs().maxCoeff() == 0.0);
      continue;
    }
    CHECK((C - d.truth.sigma[k].cast<cd>()).norm() <= 0.05 * ref);
  }
  // arg(a_{1,1}) uniform: Kolmogorov-Smirnov at the 1% level
  REQUIRE(d.truth.sigma[1].norm() > 0);
  std::vector<double> ang(n);
  for (long i = 0; i < n; ++i) ang[i] = std::arg(A.blocks[1](0, i)) + kPi;
  std::sort(ang.begin(), ang.end());
  double ks = 0.0;
  for (long i = 0; i < n; ++i) {
    const double F = ang[i] / (2 * kPi);
    ks = std::max({ks, std::abs(F - double(i) / n), std::abs(F - double(i + 1) / n)});
  }
  CHECK(ks * std::sqrt(double(n)) <= 1.628);
  // determinism
  const auto B = draw_coefficients(d.truth, d.b, 50, 11);
  for (int k = 0; k <= d.b.k_max(); ++k) CHECK(B.blocks[k] == A.blocks[k].leftCols(50));
}

TEST_CASE("Poisson observation") {
  ImageStack z(8, 100);
  CHECK(poisson_observe(z, 1).pixels.cwiseAbs().maxCoeff() == 0.0);
  ImageStack r(10, 10000);
  r.pixels.setConstant(0.01);
  const auto y = poisson_observe(r, 2);
  CHECK(y.kind == StackKind::Counts);
  const double N = double(y.pixels.size());
  const double m = y.pixels.mean();
  CHECK(std::abs(m - 0.01) <= 3 * std::sqrt(0.01 / N));
  const double var = (y.pixels.array() - m).square().sum() / (N - 1);
  CHECK(std::abs(var - m) <= 3 * std::sqrt((0.01 + 2 * 0.01 * 0.01) / N) + 3 * std::sqrt(0.01 / N));
  CHECK(poisson_observe(r, 2).pixels == y.pixels);
  CHECK(poisson_observe(r, 3).pixels != y.pixels);
  r.pixels(0, 0) = -1.0;
  CHECK_THROWS_AS(poisson_observe(r, 1), std::invalid_argument);
}

TEST_CASE("ground-truth covariance") {
  auto& d = desk();
  // single k = 0 unit variance: outer product of the radial function
  GroundTruthModel one = d.truth;
  for (auto& s : one.sigma) s.setZero();
  one.sigma[0](1, 1) = 1.0;
  const std::vector<std::array<double, 2>> pts{{2, 3}, {-5, 1}, {0, 7}, {6, -6}};
  const auto K = true_covariance(one, d.b, pts);
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = 0; j < pts.size(); ++j) {
      const double hi = d.b.radial_profile(0, 1, std::hypot(pts[i][0], pts[i][1]));
      const double hj = d.b.radial_profile(0, 1, std::hypot(pts[j][0], pts[j][1]));
      CHECK(K(i, j) == doctest::Approx(hi * hj).epsilon(1e-12));
    }
  // exact rotation invariance
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-11, 11), A(0, 2 * kPi);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::array<double, 2> p{U(rng), U(rng)}, q{U(rng), U(rng)};
    const double a = A(rng), c = std::cos(a), s = std::sin(a);
    const auto K1 = true_covariance(d.truth, d.b, {p, q});
    const auto K2 = true_covariance(d.truth, d.b, {{c * p[0] - s * p[1], s * p[0] + c * p[1]}, {c * q[0] - s * q[1], s * q[0] + c * q[1]}});
    if (std::hypot(p[0], p[1]) < 11.8 && std::hypot(q[0], q[1]) < 11.8) worst = std::max(worst, std::abs(K1(0, 1) - K2(0, 1)));
  }
  CHECK(worst <= 1e-10);

  // Monte Carlo over the full grid. The analytic kernel describes the unclipped Gaussian
  // law; clipping negative pixels moves the dim outer pixels by a few percent.
  const auto full = true_covariance(d.truth, d.tf);
  const Eigen::VectorXd mask = (mean_image(d.truth, d.tf).array() != 0.0).cast<double>();
  const long n = 100000, chunk = 10000;
  Eigen::MatrixXd sum_u = Eigen::MatrixXd::Zero(1024, 1024), sum_c = sum_u;
  Eigen::VectorXd s_u = Eigen::VectorXd::Zero(1024), s_c = s_u;
  for (long c0 = 0; c0 < n; c0 += chunk) {
    const auto draw = draw_clean_stack(d.truth, d.tf, chunk, 100 + c0);
    const Eigen::MatrixXd U = mask.asDiagonal() * d.tf.reconstruct(draw.coeffs).pixels;
    sum_u += U * U.transpose();
    s_u += U.rowwise().sum();
    sum_c += draw.images.pixels * draw.images.pixels.transpose();
    s_c += draw.images.pixels.rowwise().sum();
  }
  const Eigen::MatrixXd Cu = sum_u / double(n) - (s_u / double(n)) * (s_u / double(n)).transpose();
  const Eigen::MatrixXd Cc = sum_c / double(n) - (s_c / double(n)) * (s_c / double(n)).transpose();
  const double eu = (Cu - full).norm() / full.norm(), ec = (Cc - full).norm() / full.norm();
  MESSAGE("relative Frobenius error: unclipped " << eu << ", clipped " << ec);
  CHECK(eu <= 0.05);
  CHECK(ec <= 0.10);
}

TEST_CASE("counts covariance is the clean covariance plus the mean on the diagonal") {
  auto cfg = desk_preset();
  cfg.params = {0.3, 7, 16};
  FbBasis b(cfg.params);
  Transform tf(b);
  const auto truth = make_model(cfg, tf);
  const Eigen::MatrixXd T = true_covariance(truth, tf);
  const Eigen::VectorXd mu = mean_image(truth, tf);
  const long n = 100000;
  const auto clean = draw_clean_stack(truth, tf, n, 21);
  const auto y = poisson_observe(clean.images, 22);
  const Eigen::VectorXd ybar = y.pixels.rowwise().mean();
  const Eigen::MatrixXd X = y.pixels.colwise() - ybar;
  const Eigen::MatrixXd C = X * X.transpose() / double(n - 1);
  // The identity holds for whatever clean law is sampled, so compare against the empirical
  // moments of the clipped clean stack.
  const Eigen::VectorXd xbar = clean.images.pixels.rowwise().mean();
  const Eigen::MatrixXd Xc = clean.images.pixels.colwise() - xbar;
  const Eigen::MatrixXd Cx = Xc * Xc.transpose() / double(n - 1);
  const Eigen::MatrixXd E = Cx + Eigen::MatrixXd(xbar.asDiagonal());
  CHECK((E - T - Eigen::MatrixXd(mu.asDiagonal())).norm() <= 0.2 * (T + Eigen::MatrixXd(mu.asDiagonal())).norm());
  double worst = 0.0;
  for (long i = 0; i < 256; ++i)
    for (long j = 0; j < 256; ++j) {
      // spread of the Poisson cross terms around the clean moments
      double v = Cx(i, i) * xbar(j) + Cx(j, j) * xbar(i) + xbar(i) * xbar(j);
      if (i == j) v += xbar(i) + 2 * xbar(i) * xbar(i) + 2 * Cx(i, i) * xbar(i);
      const double sd = std::sqrt(v / n);
      if (sd == 0.0) {
        CHECK(C(i, j) == 0.0);
        continue;
      }
      worst = std::max(worst, std::abs(C(i, j) - E(i, j)) / sd);
    }
  MESSAGE("largest deviation " << worst << " standard errors; clip rate " << clean.clip_rate);
  CHECK(worst <= 6.0);
}
