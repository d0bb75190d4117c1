#include "sepca/sepca.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sepca/errors.hpp"
#include "sepca/parallel.hpp"

namespace sepca {
namespace {
constexpr double kPi = std::numbers::pi;
using cd = std::complex<double>;

const cd kIpow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};

Eigen::MatrixXd profiles_at(const FbBasis& b, int k, const std::vector<double>& r) {
  Eigen::MatrixXd H(b.p(k), r.size());
  for (size_t j = 0; j < r.size(); ++j) {
    const auto h = b.radial_profiles(r[j]);
    for (int q = 0; q < b.p(k); ++q) H(q, j) = h[b.offset(k) + q];
  }
  return H;
}
}  // namespace

int BlockCovariance::total_rank() const {
  int t = 0;
  for (int r : rank) t += r;
  return t;
}

int SepcaModel::total_rank() const {
  int t = 0;
  for (int r : ranks) t += r;
  return t;
}

RotInvMean rotinv_mean(const ImageStack& stack, const Transform& tf) {
  if (stack.n() < 1) throw std::invalid_argument("rotinv_mean: empty stack");
  const FbBasis& b = tf.basis();
  const Eigen::VectorXd ybar = stack.pixels * Eigen::VectorXd::Constant(stack.n(), 1.0 / double(stack.n()));
  const CoeffBlocks a = tf.expand(Eigen::MatrixXd(ybar));
  RotInvMean m;
  m.coeffs = a.blocks[0].col(0).real();
  const auto& disk = tf.disk();
  m.pixel_profile = Eigen::VectorXd::Zero(ybar.size());
  const Eigen::MatrixXd G0 = tf.synthesis().leftCols(b.p(0)).real();
  const Eigen::VectorXd prof = G0 * m.coeffs;
  for (size_t i = 0; i < disk.index.size(); ++i) m.pixel_profile(disk.index[i]) = std::max(prof(i), 0.0);
  const Eigen::MatrixXd H = profiles_at(b, 0, b.r_rule().nodes);
  m.node_profile = (H.transpose() * m.coeffs).cwiseMax(0.0);
  return m;
}

RotInvMean flat_noise_mean(const RotInvMean& mean, const Transform& tf) {
  const auto& disk = tf.disk();
  double s = 0.0;
  for (int p : disk.index) s += mean.pixel_profile(p);
  s /= double(disk.index.size());
  RotInvMean out = mean;
  out.pixel_profile.setZero();
  for (int p : disk.index) out.pixel_profile(p) = s;
  out.node_profile.setConstant(s);
  return out;
}

Eigen::VectorXd whitening_scale(const RotInvMean& mean) {
  return mean.pixel_profile.unaryExpr([](double f) { return f > 0.0 ? 1.0 / std::sqrt(f) : 0.0; });
}

ImageStack homogenize(const ImageStack& stack, const RotInvMean& mean) {
  if (mean.pixel_profile.size() != stack.pixels.rows())
    throw std::invalid_argument("homogenize: mean profile does not match stack geometry");
  if (!(mean.pixel_profile.maxCoeff() > 0.0)) throw DataError("homogenize: mean profile is identically zero");
  ImageStack out(stack.L, 0, StackKind::Intensity);
  out.pixels = whitening_scale(mean).asDiagonal() * stack.pixels;
  return out;
}

CoeffBlocks center_zero_frequency(const CoeffBlocks& coeffs) {
  CoeffBlocks out = coeffs;
  if (out.blocks.empty() || out.n() == 0) return out;
  auto& A0 = out.blocks[0];
  const Eigen::VectorXcd mu = A0.rowwise().mean();
  A0.colwise() -= mu;
  return out;
}

void attach_eigen(BlockCovariance& cov) {
  const int K = cov.k_max();
  cov.eigenvalues.assign(K + 1, {});
  cov.eigenvectors.assign(K + 1, {});
  for (int k = 0; k <= K; ++k) {
    const auto& S = cov.blocks[k];
    const long p = S.rows();
    if (p == 0) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(S);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    Eigen::VectorXd ev(p);
    Eigen::MatrixXcd U(p, p);
    for (long i = 0; i < p; ++i) {
      double v = es.eigenvalues()(p - 1 - i);
      if (v < 0.0 && v > -1e-12) v = 0.0;
      ev(i) = v;
      U.col(i) = es.eigenvectors().col(p - 1 - i);
    }
    cov.eigenvalues[k] = ev;
    cov.eigenvectors[k] = U;
  }
}

BlockCovariance block_covariance(const CoeffBlocks& centered, bool reflections) {
  const long n = centered.n();
  if (n < 1) throw std::invalid_argument("block_covariance: no samples");
  BlockCovariance cov;
  const int K = int(centered.blocks.size()) - 1;
  cov.blocks.resize(K + 1);
  cov.gamma.resize(K + 1);
  cov.rank.assign(K + 1, 0);
  parallel_for(K + 1, [&](long b, long e) {
    for (long k = b; k < e; ++k) {
      const auto& A = centered.blocks[k];
      Eigen::MatrixXcd S = (A * A.adjoint()) / double(n);
      if (reflections) S = S.real().cast<cd>();
      S = 0.5 * (S + S.adjoint()).eval();
      cov.blocks[k] = S;
      const double p = double(A.rows());
      cov.gamma[k] = (k == 0 || !reflections) ? p / n : p / (2.0 * n);
    }
  });
  for (int k = 0; k <= K; ++k) cov.rank[k] = int(cov.blocks[k].rows());
  attach_eigen(cov);
  return cov;
}

double spike_forward(double ell, double gamma) {
  const double sg = std::sqrt(gamma);
  if (ell > sg) return (1.0 + ell) * (1.0 + gamma / ell);
  return (1.0 + sg) * (1.0 + sg);
}

double shrink_eigenvalue(double lambda, double gamma) {
  const double sg = std::sqrt(gamma);
  if (!(lambda > (1.0 + sg) * (1.0 + sg))) return 0.0;
  const double b = lambda - 1.0 - gamma;
  return 0.5 * (b + std::sqrt(std::max(b * b - 4.0 * gamma, 0.0)));
}

double cosine_sq(double ell, double gamma) {
  if (!(ell > std::sqrt(gamma))) return 0.0;
  return (1.0 - gamma / (ell * ell)) / (1.0 + gamma / ell);
}

BlockCovariance shrink_block(const BlockCovariance& cov) {
  BlockCovariance out = cov;
  for (int k = 0; k <= cov.k_max(); ++k) {
    const long p = cov.blocks[k].rows();
    Eigen::VectorXd eta(p);
    int r = 0;
    for (long i = 0; i < p; ++i) {
      eta(i) = shrink_eigenvalue(cov.eigenvalues[k](i), cov.gamma[k]);
      if (eta(i) > 0) ++r;
    }
    const auto& U = cov.eigenvectors[k];
    out.blocks[k] = U.leftCols(r) * eta.head(r).cast<cd>().asDiagonal() * U.leftCols(r).adjoint();
    out.eigenvalues[k] = eta;
    out.rank[k] = r;
  }
  return out;
}

RecolorMatrices recolor_matrices(const RotInvMean& mean, const FbBasis& basis) {
  const auto& rr = basis.r_rule();
  if (mean.node_profile.size() != long(rr.nodes.size()))
    throw std::invalid_argument("recolor_matrices: mean profile does not match basis radial rule");
  RecolorMatrices rm;
  const long nr = long(rr.nodes.size());
  Eigen::VectorXd wb(nr), wd(nr);
  for (long j = 0; j < nr; ++j) {
    const double f = std::max(mean.node_profile(j), 0.0);
    // the angular integral of |e^{ik theta}|^2 contributes the 2 pi
    const double w = 2.0 * kPi * rr.nodes[j] * rr.weights[j];
    wb(j) = w * std::sqrt(f);
    wd(j) = w * f;
  }
  for (int k = 0; k <= basis.k_max(); ++k) {
    const Eigen::MatrixXd H = profiles_at(basis, k, rr.nodes);
    Eigen::MatrixXd B = H * wb.asDiagonal() * H.transpose();
    Eigen::MatrixXd D = H * wd.asDiagonal() * H.transpose();
    rm.B.push_back(0.5 * (B + B.transpose()));
    rm.D.push_back(0.5 * (D + D.transpose()));
  }
  return rm;
}

BlockCovariance recolor_block(const BlockCovariance& shrunken, const RecolorMatrices& rm) {
  BlockCovariance out = shrunken;
  for (int k = 0; k <= shrunken.k_max(); ++k) {
    const Eigen::MatrixXcd B = rm.B[k].cast<cd>();
    Eigen::MatrixXcd S = B.adjoint() * shrunken.blocks[k] * B;
    out.blocks[k] = 0.5 * (S + S.adjoint());
  }
  attach_eigen(out);
  return out;
}

BlockCovariance scale_block(const BlockCovariance& recolored, const RecolorMatrices& rm,
                            const BlockCovariance& shrunken, std::vector<BlockDiagnostics>* diag) {
  BlockCovariance out = recolored;
  if (diag) diag->assign(recolored.k_max() + 1, {});
  for (int k = 0; k <= recolored.k_max(); ++k) {
    const long p = recolored.blocks[k].rows();
    const double gamma = shrunken.gamma[k];
    const double trd = p > 0 ? rm.D[k].trace() / double(p) : 0.0;
    Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(p, p);
    int kept = 0;
    for (int i = 0; i < shrunken.rank[k]; ++i) {
      const double ell = shrunken.eigenvalues[k](i);
      const double t = recolored.eigenvalues[k](i);
      const double c2 = cosine_sq(ell, gamma);
      double tau = 0.0, alpha = 0.0;
      if (t > 0.0) {
        tau = trd * ell / t;
        const double num = 1.0 - (1.0 - c2) * tau;
        if (num > 0.0 && c2 > 0.0) alpha = num / c2;
      }
      if (alpha > 0.0) {
        const Eigen::VectorXcd v = recolored.eigenvectors[k].col(i) * std::sqrt(t);
        S += alpha * v * v.adjoint();
        ++kept;
      }
      if (diag) {
        auto& d = (*diag)[k];
        d.ell.push_back(ell);
        d.cos2.push_back(c2);
        d.tau.push_back(tau);
        d.t.push_back(t);
        d.alpha.push_back(alpha);
      }
    }
    out.blocks[k] = 0.5 * (S + S.adjoint());
    out.rank[k] = kept;
  }
  attach_eigen(out);
  return out;
}

Eigen::MatrixXd covariance_kernel(const std::vector<Eigen::MatrixXcd>& blocks, const FbBasis& basis,
                                  const std::vector<std::array<double, 2>>& points) {
  const long m = long(points.size());
  const int R = basis.params().R;
  Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(m, basis.half_dim());
  for (long i = 0; i < m; ++i) {
    const double x = points[i][0], y = points[i][1];
    const double r = std::hypot(x, y);
    if (!(r < R)) continue;
    const double phi = std::atan2(y, x);
    const auto h = basis.radial_profiles(r);
    for (int c = 0; c < basis.half_dim(); ++c) {
      const int k = basis.index()[c].first;
      G(i, c) = kIpow[k % 4] * h[c] * std::polar(1.0, k * phi);
    }
  }
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < int(blocks.size()) && k <= basis.k_max(); ++k) {
    const auto Gk = G.middleCols(basis.offset(k), basis.p(k));
    K += (k == 0 ? 1.0 : 2.0) * (Gk * blocks[k] * Gk.adjoint()).real();
  }
  return 0.5 * (K + K.transpose());
}

Eigen::MatrixXd covariance_kernel_grid(const std::vector<Eigen::MatrixXcd>& blocks, const Transform& tf) {
  const FbBasis& b = tf.basis();
  const long L2 = long(b.params().L) * b.params().L;
  const auto& disk = tf.disk();
  const long nd = long(disk.index.size());
  Eigen::MatrixXd Kd = Eigen::MatrixXd::Zero(nd, nd);
  for (int k = 0; k < int(blocks.size()) && k <= b.k_max(); ++k) {
    const auto Gk = tf.synthesis().middleCols(b.offset(k), b.p(k));
    const Eigen::MatrixXcd GS = Gk * blocks[k];
    Kd += (k == 0 ? 1.0 : 2.0) * (GS * Gk.adjoint()).real();
  }
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(L2, L2);
  for (long i = 0; i < nd; ++i)
    for (long j = 0; j < nd; ++j) K(disk.index[i], disk.index[j]) = 0.5 * (Kd(i, j) + Kd(j, i));
  return K;
}

SepcaModel estimate_sepca(const ImageStack& counts, const Transform& tf, const SepcaOptions& opt) {
  const FbBasis& basis = tf.basis();
  SepcaModel model;
  model.params = basis.params();
  model.radial_oversample = int(basis.r_rule().nodes.size()) / basis.n_xi();
  model.options = opt;
  model.n = counts.n();

  RotInvMean mean = rotinv_mean(counts, tf);
  if (!(mean.pixel_profile.maxCoeff() > 0.0)) throw DataError("estimate: rotationally invariant mean is zero");
  if (!opt.whiten) mean = flat_noise_mean(mean, tf);

  if (!(mean.pixel_profile.maxCoeff() > 0.0)) throw DataError("homogenize: mean profile is identically zero");
  const CoeffBlocks A = center_zero_frequency(tf.expand(counts.pixels, whitening_scale(mean)));
  const BlockCovariance cov = block_covariance(A, opt.reflections);
  const BlockCovariance shrunk = shrink_block(cov);
  model.rm = recolor_matrices(mean, basis);
  const BlockCovariance recolored = recolor_block(shrunk, model.rm);
  const BlockCovariance fin = scale_block(recolored, model.rm, shrunk, &model.diag);

  model.mean = std::move(mean);
  model.cov = fin.blocks;
  model.ranks = fin.rank;
  model.shrink_ranks = shrunk.rank;
  model.gamma = cov.gamma;
  return model;
}

}  // namespace sepca
