#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "sepca/rank.hpp"

using namespace sepca;

namespace {
Eigen::MatrixXd noise(long p, long n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N;
  Eigen::MatrixXd X(p, n);
  for (auto& v : X.reshaped()) v = N(rng);
  return X.colwise() - X.rowwise().mean();
}
}  // namespace

TEST_CASE("mp_edge_rank") {
  CHECK(mp_edge_rank({1, 1, 1}, 0.3) == 0);
  CHECK(mp_edge_rank({5, 3.9}, 1.0) == 1);
  CHECK(mp_edge_rank({2.26, 2.24}, 0.25) == 1);
  CHECK(mp_edge_rank({}, 0.5) == 0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0, 5);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(6);
    for (auto& x : v) x = U(rng);
    std::sort(v.rbegin(), v.rend());
    const int r = mp_edge_rank(v, 0.4);
    for (size_t i = 0; i < v.size(); ++i) {
      auto w = v;
      w[i] += 0.5;
      CHECK(mp_edge_rank(w, 0.4) >= r);
    }
  }
}

TEST_CASE("top singular values") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd X = noise(30, 70, 3);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
  const auto s = top_singular_values(X, 5);
  REQUIRE(s.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(s[i] == doctest::Approx(svd.singularValues()(i)).epsilon(1e-12));
  const auto st = top_singular_values(X.transpose(), 5);
  for (int i = 0; i < 5; ++i) CHECK(st[i] == doctest::Approx(s[i]).epsilon(1e-12));
  CHECK(top_singular_values(X, 100).size() == 30);

  // iterative path: scattered diagonal with known singular values
  const long p = 2100, n = 2150;
  std::vector<long> rp(p), cp(n);
  std::iota(rp.begin(), rp.end(), 0L);
  std::iota(cp.begin(), cp.end(), 0L);
  std::shuffle(rp.begin(), rp.end(), rng);
  std::shuffle(cp.begin(), cp.end(), rng);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(p, n);
  for (long i = 0; i < p; ++i) D(rp[i], cp[i]) = 100.0 * std::pow(0.7, double(i));
  const auto sd = top_singular_values(D, 4);
  for (int i = 0; i < 4; ++i) CHECK(sd[i] == doctest::Approx(100.0 * std::pow(0.7, i)).epsilon(1e-8));
}

TEST_CASE("permutation rank basics") {
  CHECK(permutation_rank(Eigen::MatrixXd::Zero(10, 20)).rank == 0);
  CHECK_THROWS_AS(permutation_rank(noise(5, 10, 1), 0.1, 9), std::invalid_argument);
  CHECK_THROWS_AS(permutation_rank(noise(5, 10, 1), 0.0, 30), std::invalid_argument);
  const auto X = noise(20, 60, 4);
  const auto a = permutation_rank(X, 0.1, 30, 9), b = permutation_rank(X, 0.1, 30, 9);
  CHECK(a.threshold == b.threshold);
  CHECK(a.rank == b.rank);
  CHECK(a.rank <= 20);
}

TEST_CASE("permutation rank: spike is found, row order does not matter") {
  const long p = 64, n = 500;
  const double edge = std::sqrt(double(n)) + std::sqrt(double(p));
  int ones = 0;
  const int runs = 50;
  for (int s = 0; s < runs; ++s) {
    Eigen::MatrixXd X = noise(p, n, 100 + s);
    std::mt19937_64 rng(200 + s);
    std::normal_distribution<double> N;
    Eigen::VectorXd u(p), v(n);
    for (auto& x : u) x = N(rng);
    for (auto& x : v) x = N(rng);
    X += 10.0 * edge * u.normalized() * v.normalized().transpose();
    const auto est = permutation_rank(X, 0.1, 30, s);
    ones += est.rank == 1;
    if (s < 5) {
      const Eigen::MatrixXd Xr = X.colwise().reverse();
      const auto er = permutation_rank(Xr, 0.1, 30, s + 1000);
      CHECK(er.rank == est.rank);
      for (size_t i = 0; i < est.singular_values.size(); ++i)
        CHECK(er.singular_values[i] == doctest::Approx(est.singular_values[i]).epsilon(1e-10));
    }
  }
  CHECK(ones >= runs * 95 / 100);
}

TEST_CASE("permutation rank null rate follows exchangeability") {
  // For i.i.d. rows the data's top singular value is exchangeable with the 30 replicates,
  // so it clears the 27th order statistic with probability 4/31.
  const int runs = 100;
  int zero = 0;
  for (int s = 0; s < runs; ++s) zero += permutation_rank(noise(64, 500, 5000 + s), 0.1, 30, s).rank == 0;
  const double expect = 27.0 / 31.0, sd = std::sqrt(expect * (1 - expect) / runs);
  MESSAGE("rank 0 in " << zero << " of " << runs << " runs; exchangeable rate " << expect);
  CHECK(std::abs(zero / double(runs) - expect) <= 4 * sd);
}
