#include "sepca/denoise.hpp"

#include <cmath>
#include <stdexcept>

#include "sepca/errors.hpp"

namespace sepca {
namespace {
using cd = std::complex<double>;

// Returns M^{-1} X for Hermitian M, adding a small ridge when M is numerically singular.
Eigen::MatrixXcd hermitian_solve(const Eigen::MatrixXcd& M, const Eigen::MatrixXcd& X, bool& ridge) {
  const long p = M.rows();
  Eigen::LDLT<Eigen::MatrixXcd> ldlt(M);
  // rcond() alone misses exact zero pivots
  const Eigen::VectorXd piv = ldlt.vectorD().real().cwiseAbs();
  const bool ok = p == 0 || (piv.maxCoeff() > 0 && piv.minCoeff() > 1e-13 * piv.maxCoeff());
  if (ldlt.info() == Eigen::Success && ok && ldlt.rcond() > 1e-13) return ldlt.solve(X);
  ridge = true;
  const double tr = M.trace().real();
  if (!(tr > 0.0)) return Eigen::MatrixXcd::Zero(p, X.cols());
  Eigen::MatrixXcd Mr = M;
  Mr.diagonal().array() += 1e-12 * tr / double(p);
  Eigen::LDLT<Eigen::MatrixXcd> l2(Mr);
  if (l2.info() != Eigen::Success) throw NumericalError("Wiener filter: regularised solve failed");
  return l2.solve(X);
}

struct Centered {
  Eigen::VectorXd mean;
  Eigen::MatrixXd X;
};

Centered center(const Eigen::MatrixXd& Y) {
  Centered c;
  c.mean = Y.rowwise().mean();
  c.X = Y.colwise() - c.mean;
  return c;
}

// Leading eigenpairs of X X^T / n for a p x n matrix, through the smaller Gram matrix.
void leading_eigen(const Eigen::MatrixXd& X, int r, Eigen::VectorXd& lam, Eigen::MatrixXd& U) {
  const long p = X.rows(), n = X.cols();
  r = int(std::min<long>(r, std::min(p, n)));
  lam.resize(r);
  U.resize(p, r);
  if (r == 0) return;
  if (p <= n) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X * X.transpose() / double(n));
    for (int i = 0; i < r; ++i) {
      lam(i) = es.eigenvalues()(p - 1 - i);
      U.col(i) = es.eigenvectors().col(p - 1 - i);
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X.transpose() * X / double(n));
    for (int i = 0; i < r; ++i) {
      lam(i) = es.eigenvalues()(n - 1 - i);
      const Eigen::VectorXd v = es.eigenvectors().col(n - 1 - i);
      Eigen::VectorXd u = X * v;
      const double nu = u.norm();
      U.col(i) = nu > 0 ? Eigen::VectorXd(u / nu) : Eigen::VectorXd::Zero(p);
    }
  }
}
}  // namespace

WienerFilter wiener_filter(const std::vector<Eigen::MatrixXcd>& S, const RecolorMatrices& rm,
                           const Eigen::VectorXd& mean_coeffs) {
  WienerFilter wf;
  const int K = int(S.size()) - 1;
  for (int k = 0; k <= K; ++k) {
    const Eigen::MatrixXcd D = rm.D[k].cast<cd>(), B = rm.B[k].cast<cd>();
    const Eigen::MatrixXcd M = D + S[k];
    // S M^{-1} = (M^{-1} S)^* since both are Hermitian
    const Eigen::MatrixXcd MiS = hermitian_solve(M, S[k], wf.ridge_warning);
    wf.F.push_back(MiS.adjoint() * B);
    if (k == 0) {
      const Eigen::MatrixXcd MiD = hermitian_solve(M, D, wf.ridge_warning);
      wf.mean_term = MiD.adjoint() * mean_coeffs.cast<cd>();
    }
  }
  return wf;
}

CoeffBlocks wiener_denoise(const CoeffBlocks& coeffs, const std::vector<Eigen::MatrixXcd>& S,
                           const RecolorMatrices& rm, const Eigen::VectorXd& mean_coeffs, bool* ridge_warning) {
  if (coeffs.blocks.size() != S.size()) throw std::invalid_argument("wiener_denoise: block count mismatch");
  const WienerFilter wf = wiener_filter(S, rm, mean_coeffs);
  if (ridge_warning) *ridge_warning = wf.ridge_warning;
  CoeffBlocks out;
  for (size_t k = 0; k < S.size(); ++k) {
    Eigen::MatrixXcd Ah = wf.F[k] * coeffs.blocks[k];
    if (k == 0) Ah.colwise() += wf.mean_term;
    out.blocks.push_back(std::move(Ah));
  }
  return out;
}

ImageStack denoise_stack(const ImageStack& stack, const SepcaModel& model, const Transform& tf) {
  const auto& p = tf.basis().params();
  if (p.L != model.params.L || p.R != model.params.R || p.c != model.params.c)
    throw std::invalid_argument("denoise_stack: transform does not match model basis");
  if (!(model.mean.pixel_profile.maxCoeff() > 0.0)) throw DataError("denoise: mean profile is identically zero");
  const CoeffBlocks A = tf.expand(stack.pixels, whitening_scale(model.mean));
  return tf.reconstruct(wiener_denoise(A, model.cov, model.rm, model.mean.coeffs), StackKind::Intensity);
}

Eigen::MatrixXd sample_covariance(const ImageStack& stack) {
  if (stack.n() < 1) throw std::invalid_argument("sample_covariance: empty stack");
  const Centered c = center(stack.pixels);
  return c.X * c.X.transpose() / double(stack.n());
}

ImageStack eblp_denoise_cartesian(const ImageStack& stack, const Eigen::MatrixXd& S, const Eigen::VectorXd& mean,
                                  double epsilon) {
  const long p = stack.pixels.rows();
  if (S.rows() != p || S.cols() != p || mean.size() != p)
    throw std::invalid_argument("eblp_denoise_cartesian: dimension mismatch");
  const double m = mean.mean();
  Eigen::MatrixXd M = S;
  M.diagonal() += (1.0 - epsilon) * mean + Eigen::VectorXd::Constant(p, epsilon * m);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  if (ldlt.info() != Eigen::Success) throw NumericalError("EBLP: factorisation failed");
  // S M^{-1} = (M^{-1} S)^T
  const Eigen::MatrixXd W = ldlt.solve(S).transpose();
  ImageStack out(stack.L, stack.n(), StackKind::Intensity);
  out.pixels = (W * (stack.pixels.colwise() - mean)).colwise() + mean;
  return out;
}

ImageStack pca_project_denoise(const ImageStack& stack, int n_components) {
  if (n_components < 0) throw std::invalid_argument("pca_project_denoise: negative component count");
  const Centered c = center(stack.pixels);
  const long p = c.X.rows(), n = c.X.cols();
  const int r = int(std::min<long>(n_components, std::min(p, n)));
  ImageStack out(stack.L, n, StackKind::Intensity);
  Eigen::MatrixXd proj;
  if (p <= n) {
    Eigen::VectorXd lam;
    Eigen::MatrixXd U;
    leading_eigen(c.X, r, lam, U);
    proj = U * (U.transpose() * c.X);
  } else {
    // U U^T X = X V V^T with V the leading eigenvectors of X^T X
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.X.transpose() * c.X);
    const Eigen::MatrixXd V = es.eigenvectors().rightCols(r);
    proj = (c.X * V) * V.transpose();
  }
  out.pixels = proj.colwise() + c.mean;
  return out;
}

CartesianEstimate pca_cartesian(const ImageStack& stack, int n_components) {
  const Centered c = center(stack.pixels);
  Eigen::VectorXd lam;
  Eigen::MatrixXd U;
  leading_eigen(c.X, n_components, lam, U);
  CartesianEstimate est;
  est.mean = c.mean;
  est.rank = int(lam.size());
  est.cov = U * lam.asDiagonal() * U.transpose();
  return est;
}

CartesianEstimate epca_cartesian(const ImageStack& counts) {
  const long n = counts.n();
  if (n < 1) throw std::invalid_argument("epca_cartesian: empty stack");
  const long L2 = counts.pixels.rows();
  const Eigen::VectorXd ybar = counts.pixels.rowwise().mean();
  std::vector<long> sup;
  for (long i = 0; i < L2; ++i)
    if (ybar(i) > 0) sup.push_back(i);
  if (sup.empty()) throw DataError("epca_cartesian: no pixel has a positive mean");
  const long p = long(sup.size());
  Eigen::VectorXd d(p);
  Eigen::MatrixXd Z(p, n);
  for (long i = 0; i < p; ++i) {
    d(i) = ybar(sup[i]);
    Z.row(i) = (counts.pixels.row(sup[i]).array() - d(i)) / std::sqrt(d(i));
  }
  const double gamma = double(p) / double(n);

  // Whitened spectrum: only eigenvalues above the edge matter, so fetch a generous prefix.
  int want = 16;
  Eigen::VectorXd lam;
  Eigen::MatrixXd U;
  while (true) {
    leading_eigen(Z, want, lam, U);
    int above = 0;
    for (long i = 0; i < lam.size(); ++i)
      if (shrink_eigenvalue(lam(i), gamma) > 0) ++above;
    if (above < lam.size() || lam.size() == std::min(p, n)) break;
    want *= 2;
  }
  std::vector<double> ell;
  for (long i = 0; i < lam.size(); ++i) {
    const double e = shrink_eigenvalue(lam(i), gamma);
    if (e > 0) ell.push_back(e);
  }
  const int r = int(ell.size());

  CartesianEstimate est;
  est.mean = ybar;
  est.cov = Eigen::MatrixXd::Zero(L2, L2);
  if (r == 0) return est;

  // Recolour D^{1/2} U diag(ell) U^T D^{1/2}; its column space is spanned by D^{1/2} U.
  const Eigen::VectorXd sd = d.cwiseSqrt();
  const Eigen::MatrixXd C = sd.asDiagonal() * U.leftCols(r);
  // eigen of C diag(ell) C^T through the r x r problem
  const Eigen::MatrixXd Gm = C.transpose() * C;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gs(Gm);
  const Eigen::MatrixXd Gh = gs.operatorSqrt();
  Eigen::Map<const Eigen::VectorXd> ellv(ell.data(), r);
  const Eigen::MatrixXd small = Gh * ellv.asDiagonal() * Gh;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ss(small);
  // C = Q Gh for orthonormal Q = C Gh^{-1}
  const Eigen::MatrixXd Q = C * gs.operatorInverseSqrt();

  const double trd = d.sum() / double(p);
  Eigen::MatrixXd Ss = Eigen::MatrixXd::Zero(p, p);
  int kept = 0;
  for (int i = 0; i < r; ++i) {
    const double t = ss.eigenvalues()(r - 1 - i);
    if (!(t > 0)) continue;
    const Eigen::VectorXd v = Q * ss.eigenvectors().col(r - 1 - i);
    const double c2 = cosine_sq(ell[i], gamma);
    const double tau = trd * ell[i] / t;
    const double num = 1.0 - (1.0 - c2) * tau;
    if (num > 0 && c2 > 0) {
      Ss += (num / c2) * t * v * v.transpose();
      ++kept;
    }
  }
  for (long i = 0; i < p; ++i)
    for (long j = 0; j < p; ++j) est.cov(sup[i], sup[j]) = Ss(i, j);
  est.rank = kept;
  return est;
}

}  // namespace sepca
