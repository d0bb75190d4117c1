#include "sepca/synth.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lp.hpp"
#include "sepca/errors.hpp"
#include "sepca/parallel.hpp"
#include "sepca/random.hpp"
#include "sepca/sepca.hpp"

namespace sepca {
namespace {
constexpr double kPi = std::numbers::pi;
using cd = std::complex<double>;

constexpr int kGrid = 800;
constexpr double kProfileFloor = 1e-3;

std::vector<double> radial_grid(int R) {
  std::vector<double> r(kGrid);
  for (int i = 0; i < kGrid; ++i) r[i] = R * double(i) / kGrid;
  return r;
}

Eigen::MatrixXd profiles(const FbBasis& b, int k, const std::vector<double>& r) {
  Eigen::MatrixXd H(r.size(), b.p(k));
  for (size_t i = 0; i < r.size(); ++i) {
    const auto h = b.radial_profiles(r[i]);
    for (int q = 0; q < b.p(k); ++q) H(i, q) = h[b.offset(k) + q];
  }
  return H;
}

// max t  s.t.  profile >= t on r <= frac R,  profile >= 0 on [0, R),  integral <= 1.
Eigen::VectorXd ring_mean(const FbBasis& b, double frac) {
  const int R = b.params().R;
  const auto r = radial_grid(R);
  const Eigen::MatrixXd H = profiles(b, 0, r);
  const int p0 = b.p(0);
  const double dr = double(R) / kGrid;
  Eigen::RowVectorXd w(p0);
  w.setZero();
  for (int i = 0; i < kGrid; ++i) w += 2.0 * kPi * r[i] * dr * H.row(i);

  // variables: a+ (p0), a- (p0), t
  const int nv = 2 * p0 + 1;
  Eigen::MatrixXd A(kGrid + 1, nv);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(kGrid + 1);
  for (int i = 0; i < kGrid; ++i) {
    A.row(i).head(p0) = -H.row(i);
    A.row(i).segment(p0, p0) = H.row(i);
    A(i, nv - 1) = r[i] <= frac * R ? 1.0 : 0.0;
  }
  A.row(kGrid).head(p0) = w;
  A.row(kGrid).segment(p0, p0) = -w;
  A(kGrid, nv - 1) = 0.0;
  rhs(kGrid) = 1.0;
  Eigen::VectorXd obj = Eigen::VectorXd::Zero(nv);
  obj(nv - 1) = 1.0;
  const Eigen::VectorXd x = detail::simplex_max(A, rhs, obj);
  if (!(x(nv - 1) > 0)) throw DataError("ring mean: no strictly positive profile exists for this basis");
  return x.head(p0) - x.segment(p0, p0);
}

Eigen::VectorXd mask_vector(const GroundTruthModel& m) {
  const int L = m.params.L, h = L / 2;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(long(L) * L);
  const double rmax = m.signal_radius * m.params.R;
  for (int row = 0; row < L; ++row)
    for (int col = 0; col < L; ++col)
      if (std::hypot(double(col - h), double(row - h)) < rmax) v(long(row) * L + col) = 1.0;
  return v;
}

double clip_in_place(Eigen::MatrixXd& X, const Eigen::VectorXd& mask) {
  double neg = 0.0, pos = 0.0;
  for (long j = 0; j < X.cols(); ++j)
    for (long i = 0; i < X.rows(); ++i) {
      double& v = X(i, j);
      v *= mask(i);
      if (v < 0) {
        neg -= v;
        v = 0.0;
      } else {
        pos += v;
      }
    }
  return pos > 0 ? neg / pos : 0.0;
}
}  // namespace

ModelConfig desk_preset() {
  ModelConfig c;
  c.params = {0.15, 14, 32};
  c.mean_count = 0.05;
  c.ranks = {2, 1, 1, 1};
  c.spectrum = {1.0, 0.8, 0.6, 0.5, 0.4};
  return c;
}

ModelConfig paper_preset() {
  ModelConfig c = desk_preset();
  c.params = {0.08, 61, 128};
  c.mean_count = 0.01;
  return c;
}

ModelConfig preset(const std::string& name) {
  if (name == "desk") return desk_preset();
  if (name == "paper") return paper_preset();
  throw std::invalid_argument("unknown preset '" + name + "'");
}

int GroundTruthModel::total_rank() const {
  int r = 0;
  for (const auto& S : sigma) {
    if (S.size() == 0) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    for (long i = 0; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()(i) > 1e-12 * std::max(top, 1e-300)) ++r;
  }
  return r;
}

GroundTruthModel make_model(const ModelConfig& cfg, const Transform& tf) {
  const FbBasis& b = tf.basis();
  if (b.params().L != cfg.params.L || b.params().R != cfg.params.R || b.params().c != cfg.params.c)
    throw std::invalid_argument("make_model: transform does not match config");
  if (!(cfg.mean_count > 0)) throw std::invalid_argument("make_model: mean_count must be positive");
  if (!(cfg.signal_radius > 0 && cfg.signal_radius <= 1)) throw std::invalid_argument("make_model: signal_radius in (0,1]");
  if (int(cfg.ranks.size()) > b.k_max() + 1) throw std::invalid_argument("make_model: ranks exceed k_max");

  GroundTruthModel m;
  m.params = cfg.params;
  m.signal_radius = cfg.signal_radius;
  m.intensity_scale = cfg.mean_count;
  m.seed = cfg.seed;
  m.mean_coeffs = ring_mean(b, cfg.ring_fraction);
  m.sigma.assign(b.k_max() + 1, {});
  for (int k = 0; k <= b.k_max(); ++k) m.sigma[k] = Eigen::MatrixXd::Zero(b.p(k), b.p(k));

  // scale the mean so the masked mean image averages mean_count per pixel
  const double avg = mean_image(m, tf).mean();
  if (!(avg > 0)) throw DataError("make_model: mean image has no positive mass inside the signal radius");
  m.mean_coeffs *= cfg.mean_count / avg;

  const auto r = radial_grid(cfg.params.R);
  const Eigen::VectorXd prof = profiles(b, 0, r) * m.mean_coeffs;
  const Eigen::VectorXd pn = (prof / prof.maxCoeff()).cwiseMax(kProfileFloor);
  Eigen::VectorXd rv(kGrid);
  for (int i = 0; i < kGrid; ++i) rv(i) = r[i];

  const double disk_px = double(tf.disk().index.size());
  const double unit = cfg.mean_count * double(cfg.params.L) * cfg.params.L / disk_px;
  size_t next = 0;
  for (int k = 0; k < int(cfg.ranks.size()); ++k) {
    const int rk = cfg.ranks[k];
    if (rk == 0) continue;
    if (rk > b.p(k)) throw std::invalid_argument("make_model: rank exceeds block size");
    const Eigen::MatrixXd H = profiles(b, k, r);
    const Eigen::MatrixXd M0 = H.transpose() * rv.asDiagonal() * H;
    const Eigen::MatrixXd M1 = H.transpose() * rv.cwiseQuotient(pn).asDiagonal() * H;
    // directions whose energy sits where the mean is bright
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(M1, M0);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(ges.eigenvectors().leftCols(rk));
    const Eigen::MatrixXd U = qr.householderQ() * Eigen::MatrixXd::Identity(b.p(k), rk);
    Eigen::VectorXd lam(rk);
    for (int i = 0; i < rk; ++i) {
      if (next >= cfg.spectrum.size()) throw std::invalid_argument("make_model: spectrum shorter than total rank");
      lam(i) = cfg.spectrum[next++] * unit * cfg.snr;
    }
    m.sigma[k] = U * lam.asDiagonal() * U.transpose();
  }

  const CleanDraw pilot = draw_clean_stack(m, tf, 2000, mix_seed(cfg.seed, 0xC11F));
  m.clip_rate = pilot.clip_rate;
  if (m.clip_rate > cfg.max_clip_rate)
    throw DataError("make_model: clip rate " + std::to_string(m.clip_rate) + " exceeds limit");
  return m;
}

Eigen::VectorXd mean_image(const GroundTruthModel& model, const Transform& tf) {
  CoeffBlocks a = zero_coeffs(tf.basis(), 1);
  a.blocks[0].col(0) = model.mean_coeffs.cast<cd>();
  Eigen::VectorXd img = tf.reconstruct(a).pixels.col(0);
  return img.cwiseProduct(mask_vector(model));
}

CoeffBlocks draw_coefficients(const GroundTruthModel& model, const FbBasis& basis, long n, std::uint64_t seed) {
  const int K = basis.k_max();
  std::vector<Eigen::MatrixXd> factor(K + 1);
  for (int k = 0; k <= K; ++k) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.sigma[k]);
    factor[k] = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  CoeffBlocks out = zero_coeffs(basis, n);
  parallel_for(n, [&](long b, long e) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.0, 2.0 * kPi);
    for (long i = b; i < e; ++i) {
      Rng rng = make_rng(seed, std::uint64_t(i));
      const double alpha = ud(rng);
      for (int k = 0; k <= K; ++k) {
        const int p = basis.p(k);
        Eigen::VectorXcd z(p);
        for (int q = 0; q < p; ++q) {
          if (k == 0) {
            z(q) = nd(rng);
          } else {
            const double re = nd(rng), im = nd(rng);
            z(q) = cd(re, im) / std::sqrt(2.0);
          }
        }
        Eigen::VectorXcd a = factor[k].cast<cd>() * z;
        if (k == 0) a += model.mean_coeffs.cast<cd>();
        out.blocks[k].col(i) = a * std::polar(1.0, -k * alpha);
      }
    }
  }, 64);
  return out;
}

CleanDraw draw_clean_stack(const GroundTruthModel& model, const Transform& tf, long n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("draw_clean_stack: n must be positive");
  CleanDraw d;
  d.coeffs = draw_coefficients(model, tf.basis(), n, seed);
  d.images = tf.reconstruct(d.coeffs, StackKind::Intensity);
  d.clip_rate = clip_in_place(d.images.pixels, mask_vector(model));
  return d;
}

ImageStack poisson_observe(const ImageStack& clean, std::uint64_t seed) {
  ImageStack out(clean.L, clean.n(), StackKind::Counts);
  parallel_for(clean.n(), [&](long b, long e) {
    for (long i = b; i < e; ++i) {
      Rng rng = make_rng(mix_seed(seed, 0x9015), std::uint64_t(i));
      for (long p = 0; p < clean.pixels.rows(); ++p) {
        const double rate = clean.pixels(p, i);
        if (rate < 0 || !std::isfinite(rate)) throw std::invalid_argument("poisson_observe: invalid rate");
        if (rate == 0.0) continue;
        std::poisson_distribution<long> pd(rate);
        out.pixels(p, i) = double(pd(rng));
      }
    }
  }, 64);
  return out;
}

Eigen::MatrixXd true_covariance(const GroundTruthModel& model, const Transform& tf) {
  std::vector<Eigen::MatrixXcd> S;
  for (const auto& s : model.sigma) S.push_back(s.cast<cd>());
  const Eigen::VectorXd mask = mask_vector(model);
  return mask.asDiagonal() * covariance_kernel_grid(S, tf) * mask.asDiagonal();
}

Eigen::MatrixXd true_covariance(const GroundTruthModel& model, const FbBasis& basis,
                                const std::vector<std::array<double, 2>>& points) {
  std::vector<Eigen::MatrixXcd> S;
  for (const auto& s : model.sigma) S.push_back(s.cast<cd>());
  Eigen::MatrixXd K = covariance_kernel(S, basis, points);
  const double rmax = model.signal_radius * model.params.R;
  for (size_t i = 0; i < points.size(); ++i)
    if (!(std::hypot(points[i][0], points[i][1]) < rmax)) {
      K.row(i).setZero();
      K.col(i).setZero();
    }
  return K;
}

}  // namespace sepca
