#include "sepca/rank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sepca/parallel.hpp"
#include "sepca/random.hpp"

namespace sepca {

std::vector<double> top_singular_values(const Eigen::Ref<const Eigen::MatrixXd>& X, int count) {
  const long p = X.rows(), n = X.cols();
  const long m = std::min(p, n);
  count = int(std::min<long>(count, m));
  std::vector<double> out;
  if (count <= 0) return out;
  if (m <= 2048) {
    const Eigen::MatrixXd G = p <= n ? Eigen::MatrixXd(X * X.transpose()) : Eigen::MatrixXd(X.transpose() * X);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    for (int i = 0; i < count; ++i) out.push_back(std::sqrt(std::max(es.eigenvalues()(m - 1 - i), 0.0)));
    return out;
  }
  // Block subspace iteration on X X^T with Rayleigh-Ritz.
  const int b = std::min<long>(m, count + 8);
  Rng rng(12345);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd Q(p, b);
  for (long i = 0; i < Q.size(); ++i) Q.data()[i] = nd(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Q);
  Q = qr.householderQ() * Eigen::MatrixXd::Identity(p, b);
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(b);
  Eigen::VectorXd ritz;
  for (int it = 0; it < 300; ++it) {
    Eigen::MatrixXd Z = X * (X.transpose() * Q);
    Eigen::HouseholderQR<Eigen::MatrixXd> qz(Z);
    Q = qz.householderQ() * Eigen::MatrixXd::Identity(p, b);
    const Eigen::MatrixXd XtQ = X.transpose() * Q;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(XtQ.transpose() * XtQ, Eigen::EigenvaluesOnly);
    ritz = es.eigenvalues().reverse();
    if (it > 2 && ((ritz - prev).head(count).cwiseAbs().array() <= 1e-9 * ritz(0)).all()) break;
    prev = ritz;
  }
  for (int i = 0; i < count; ++i) out.push_back(std::sqrt(std::max(ritz(i), 0.0)));
  return out;
}

RankEstimate permutation_rank(const Eigen::Ref<const Eigen::MatrixXd>& data, double rho, int n_perm,
                              std::uint64_t seed) {
  if (n_perm < 10) throw std::invalid_argument("permutation_rank: n_perm must be at least 10");
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("permutation_rank: rho must lie in (0,1]");
  RankEstimate est;
  est.rho = rho;
  est.n_permutations = n_perm;
  const long p = data.rows(), n = data.cols();
  if (p == 0 || n == 0) return est;

  std::vector<double> tops(n_perm, 0.0);
  parallel_for(n_perm, [&](long b, long e) {
    Eigen::MatrixXd P(p, n);
    std::vector<long> perm(n);
    for (long rep = b; rep < e; ++rep) {
      Rng rng = make_rng(seed, std::uint64_t(rep));
      for (long i = 0; i < p; ++i) {
        std::iota(perm.begin(), perm.end(), 0L);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (long j = 0; j < n; ++j) P(i, j) = data(i, perm[j]);
      }
      tops[rep] = top_singular_values(P, 1)[0];
    }
  });
  std::sort(tops.begin(), tops.end());
  const int idx = std::clamp(int(std::ceil((1.0 - rho) * n_perm - 1e-12)), 1, n_perm);
  est.threshold = tops[idx - 1];

  // Singular values are only needed until one falls below the threshold.
  int want = 8;
  while (true) {
    est.singular_values = top_singular_values(data, want);
    est.rank = 0;
    for (double s : est.singular_values)
      if (s > est.threshold) ++est.rank;
    if (est.rank < int(est.singular_values.size()) || int(est.singular_values.size()) == std::min(p, n)) break;
    want *= 2;
  }
  return est;
}

int mp_edge_rank(const std::vector<double>& eigenvalues, double gamma) {
  const double edge = (1.0 + std::sqrt(gamma)) * (1.0 + std::sqrt(gamma));
  int r = 0;
  for (double v : eigenvalues)
    if (v > edge) ++r;
  return r;
}

}  // namespace sepca
