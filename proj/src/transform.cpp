#include "sepca/transform.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "sepca/errors.hpp"
#include "sepca/parallel.hpp"

namespace sepca {
namespace {
constexpr double kPi = std::numbers::pi;
using cd = std::complex<double>;

void check_stack(const ImageStack& s, const BasisParams& p) {
  if (s.L != p.L) throw std::invalid_argument("image side does not match basis");
  if (s.pixels.rows() != long(s.L) * s.L) throw std::invalid_argument("stack pixel count does not match L");
}

PixelGeometry collect(const BasisParams& p, bool disk_only) {
  PixelGeometry g;
  const int h = p.L / 2;
  for (int row = 0; row < p.L; ++row) {
    for (int col = 0; col < p.L; ++col) {
      const int x = col - h, y = row - h;
      const double r = std::hypot(double(x), double(y));
      if (disk_only ? !(r < p.R) : (x < -p.R || x > p.R - 1 || y < -p.R || y > p.R - 1)) continue;
      g.index.push_back(row * p.L + col);
      g.x.push_back(x);
      g.y.push_back(y);
      g.r.push_back(r);
      g.phi.push_back(std::atan2(double(y), double(x)));
    }
  }
  return g;
}

// (2 pi / n_theta) sum_l F(xi, theta_l) e^{-i k theta_l} for k = 0..kmax.
Eigen::MatrixXcd angular_harmonics(const Eigen::MatrixXcd& polar, int kmax) {
  const int nt = int(polar.cols());
  Eigen::MatrixXcd out(polar.rows(), kmax + 1);
  for (int k = 0; k <= kmax; ++k) {
    Eigen::VectorXcd e(nt);
    for (int l = 0; l < nt; ++l) e(l) = std::polar(2.0 * kPi / nt, -k * 2.0 * kPi * l / nt);
    out.col(k) = polar * e;
  }
  return out;
}

// Radial weights N_{kq} J_k(R_{kq} xi_j / c) xi_j w_j, one row per (k,q).
Eigen::MatrixXd radial_weights(const FbBasis& b) {
  const auto& xr = b.xi_rule();
  const double c = b.params().c;
  Eigen::MatrixXd w(b.half_dim(), b.n_xi());
  for (int i = 0; i < b.half_dim(); ++i) {
    const auto [k, q] = b.index()[i];
    for (int j = 0; j < b.n_xi(); ++j)
      w(i, j) = b.normalizer(k, q) * bessel_j(k, b.root(k, q) * xr.nodes[j] / c) * xr.nodes[j] * xr.weights[j];
  }
  return w;
}

}  // namespace

CoeffBlocks zero_coeffs(const FbBasis& basis, long n) {
  CoeffBlocks c;
  for (int k = 0; k <= basis.k_max(); ++k) c.blocks.push_back(Eigen::MatrixXcd::Zero(basis.p(k), n));
  return c;
}

PixelGeometry window_pixels(const BasisParams& p) { return collect(p, false); }
PixelGeometry disk_pixels(const BasisParams& p) { return collect(p, true); }

Eigen::MatrixXcd polar_fourier_samples(const Eigen::Ref<const Eigen::VectorXd>& image, const FbBasis& basis) {
  const auto& p = basis.params();
  if (image.size() != long(p.L) * p.L) throw std::invalid_argument("image size does not match basis");
  const auto win = window_pixels(p);
  const int nx = basis.n_xi(), nt = basis.n_theta();
  Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(nx, nt);
  for (int j = 0; j < nx; ++j) {
    const double xi = basis.xi_rule().nodes[j];
    for (int l = 0; l < nt; ++l) {
      const double th = 2.0 * kPi * l / nt;
      const double cx = xi * std::cos(th), cy = xi * std::sin(th);
      cd acc = 0.0;
      for (size_t m = 0; m < win.index.size(); ++m) {
        const double v = image(win.index[m]);
        if (v != 0.0) acc += v * std::polar(1.0, -2.0 * kPi * (win.x[m] * cx + win.y[m] * cy));
      }
      F(j, l) = acc / (2.0 * p.R);
    }
  }
  return F;
}

CoeffBlocks expand_direct(const ImageStack& stack, const FbBasis& basis) {
  check_stack(stack, basis.params());
  const Eigen::MatrixXd W = radial_weights(basis);
  CoeffBlocks out = zero_coeffs(basis, stack.n());
  const double scale = 2.0 * basis.params().R;
  for (long i = 0; i < stack.n(); ++i) {
    const Eigen::MatrixXcd H = angular_harmonics(polar_fourier_samples(stack.pixels.col(i), basis), basis.k_max());
    for (int r = 0; r < basis.half_dim(); ++r) {
      const auto [k, q] = basis.index()[r];
      cd a = scale * W.row(r).cast<cd>().dot(H.col(k));  // dot conjugates the first argument; W is real
      if (k == 0) a = a.real();
      out.blocks[k](q, i) = a;
    }
  }
  return out;
}

Transform::Transform(const FbBasis& basis)
    : basis_(basis), window_(window_pixels(basis.params())), disk_(disk_pixels(basis.params())) {
  const int P = basis_.half_dim(), nx = basis_.n_xi(), nt = basis_.n_theta(), K = basis_.k_max();
  const long nw = long(window_.index.size()), nd = long(disk_.index.size());
  const Eigen::MatrixXd W = radial_weights(basis_);

  ana_re_.resize(P, nw);
  ana_im_.resize(P, nw);
  std::vector<double> cth(nt), sth(nt);
  for (int l = 0; l < nt; ++l) {
    cth[l] = std::cos(2.0 * kPi * l / nt);
    sth[l] = std::sin(2.0 * kPi * l / nt);
  }
  // Column m is the expansion of a unit impulse at window pixel m (the 2R and 1/(2R) cancel).
  parallel_for(nw, [&](long b, long e) {
    Eigen::MatrixXcd polar(nx, nt);
    for (long m = b; m < e; ++m) {
      for (int j = 0; j < nx; ++j) {
        const double xi = basis_.xi_rule().nodes[j];
        for (int l = 0; l < nt; ++l)
          polar(j, l) = std::polar(1.0, -2.0 * kPi * xi * (window_.x[m] * cth[l] + window_.y[m] * sth[l]));
      }
      const Eigen::MatrixXcd H = angular_harmonics(polar, K);
      for (int r = 0; r < P; ++r) {
        const int k = basis_.index()[r].first;
        const cd a = W.row(r).cast<cd>().dot(H.col(k));
        ana_re_(r, m) = a.real();
        ana_im_(r, m) = k == 0 ? 0.0 : a.imag();
      }
    }
  }, 16);

  synth_.resize(nd, P);
  parallel_for(nd, [&](long b, long e) {
    for (long m = b; m < e; ++m) {
      const auto h = basis_.radial_profiles(disk_.r[m]);
      for (int r = 0; r < P; ++r) {
        const int k = basis_.index()[r].first;
        static const cd ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        synth_(m, r) = ipow[k % 4] * h[r] * std::polar(1.0, k * disk_.phi[m]);
      }
    }
  }, 16);
  syn_re_ = synth_.real();
  syn_im_ = synth_.imag();
  for (int r = 0; r < P; ++r) {
    if (basis_.index()[r].first > 0) {
      syn_re_.col(r) *= 2.0;
      syn_im_.col(r) *= 2.0;
    }
  }
}

CoeffBlocks Transform::expand(const ImageStack& stack) const {
  check_stack(stack, basis_.params());
  return expand(stack.pixels);
}

CoeffBlocks Transform::expand(const Eigen::Ref<const Eigen::MatrixXd>& pixels) const {
  return expand(pixels, Eigen::VectorXd::Ones(pixels.rows()));
}

CoeffBlocks Transform::expand(const Eigen::Ref<const Eigen::MatrixXd>& pixels, const Eigen::VectorXd& pixel_scale) const {
  const long n = pixels.cols();
  const long nw = long(window_.index.size());
  if (pixels.rows() != long(basis_.params().L) * basis_.params().L || pixel_scale.size() != pixels.rows())
    throw std::invalid_argument("pixel rows do not match basis");
  const int P = basis_.half_dim();
  Eigen::VectorXd w(nw);
  for (long m = 0; m < nw; ++m) w(m) = pixel_scale(window_.index[m]);
  Eigen::MatrixXd re(P, n), im(P, n);
  parallel_for(n, [&](long b, long e) {
    // gather in column tiles so the working set stays in cache
    constexpr long kTile = 256;
    Eigen::MatrixXd Y(nw, kTile);
    for (long t = b; t < e; t += kTile) {
      const long cols = std::min(kTile, e - t);
      for (long j = 0; j < cols; ++j)
        for (long m = 0; m < nw; ++m) Y(m, j) = w(m) * pixels(window_.index[m], t + j);
      re.middleCols(t, cols).noalias() = ana_re_ * Y.leftCols(cols);
      im.middleCols(t, cols).noalias() = ana_im_ * Y.leftCols(cols);
    }
  }, 64);
  CoeffBlocks out;
  for (int k = 0; k <= basis_.k_max(); ++k) {
    const int o = basis_.offset(k), pk = basis_.p(k);
    Eigen::MatrixXcd A(pk, n);
    A.real() = re.middleRows(o, pk);
    A.imag() = im.middleRows(o, pk);
    out.blocks.push_back(std::move(A));
  }
  return out;
}

ImageStack Transform::reconstruct(const CoeffBlocks& coeffs, StackKind kind) const {
  if (int(coeffs.blocks.size()) != basis_.k_max() + 1)
    throw std::invalid_argument("coefficient blocks do not match basis");
  const long n = coeffs.n();
  const int P = basis_.half_dim();
  Eigen::MatrixXd re(P, n), im(P, n);
  for (int k = 0; k <= basis_.k_max(); ++k) {
    if (coeffs.blocks[k].rows() != basis_.p(k) || coeffs.blocks[k].cols() != n)
      throw std::invalid_argument("coefficient block shape mismatch");
    re.middleRows(basis_.offset(k), basis_.p(k)) = coeffs.blocks[k].real();
    im.middleRows(basis_.offset(k), basis_.p(k)) = coeffs.blocks[k].imag();
  }
  ImageStack out(basis_.params().L, n, kind);
  const long nd = long(disk_.index.size());
  parallel_for(n, [&](long b, long e) {
    constexpr long kTile = 256;
    Eigen::MatrixXd X(nd, kTile);
    for (long t = b; t < e; t += kTile) {
      const long w = std::min(kTile, e - t);
      X.leftCols(w).noalias() = syn_re_ * re.middleCols(t, w);
      X.leftCols(w).noalias() -= syn_im_ * im.middleCols(t, w);
      for (long j = 0; j < w; ++j)
        for (long m = 0; m < nd; ++m) out.pixels(disk_.index[m], t + j) = X(m, j);
    }
  }, 64);
  return out;
}

int estimate_support_radius(const ImageStack& stack, double fraction) {
  if (stack.n() < 1) throw std::invalid_argument("support radius needs at least one image");
  if (!(fraction > 0 && fraction < 1)) throw std::invalid_argument("fraction must lie in (0,1)");
  const Eigen::VectorXd mean = stack.pixels.rowwise().mean();
  const int L = stack.L, h = L / 2;
  // mass[R] = sum over pixels with R-1 <= r < R
  std::vector<double> ring(L, 0.0);
  double total = 0.0;
  for (int row = 0; row < L; ++row)
    for (int col = 0; col < L; ++col) {
      const double v = mean(long(row) * L + col);
      total += v;
      const double r = std::hypot(double(col - h), double(row - h));
      const int b = int(std::floor(r)) + 1;
      if (b < L) ring[b] += v;
    }
  if (!(total > 0)) throw DataError("support radius: mean image has no positive mass");
  double cum = 0.0;
  for (int R = 1; R <= h; ++R) {
    cum += ring[R];
    if (cum >= fraction * total) return R;
  }
  return h;
}

ImageStack radial_whiten(const ImageStack& stack) {
  const int L = stack.L, h = L / 2;
  const Eigen::VectorXd mean = stack.pixels.rowwise().mean();
  // Average over pixel orbits of equal x^2 + y^2; coarser rings bias the rate near sharp edges.
  const int nb = 2 * h * h + 1;
  std::vector<double> sum(nb, 0.0);
  std::vector<int> cnt(nb, 0);
  std::vector<int> bin(long(L) * L);
  for (int row = 0; row < L; ++row)
    for (int col = 0; col < L; ++col) {
      const int b = (col - h) * (col - h) + (row - h) * (row - h);
      bin[long(row) * L + col] = b;
      sum[b] += mean(long(row) * L + col);
      ++cnt[b];
    }
  Eigen::VectorXd scale(long(L) * L);
  for (long p = 0; p < scale.size(); ++p) {
    const double f = sum[bin[p]] / cnt[bin[p]];
    scale(p) = f > 0 ? 1.0 / std::sqrt(f) : 0.0;
  }
  ImageStack out(L, 0, stack.kind);
  out.pixels = scale.asDiagonal() * stack.pixels;
  return out;
}

BandLimitEstimate estimate_band_limit(const ImageStack& whitened, double fraction, int R) {
  if (!(fraction > 0 && fraction < 1)) throw std::invalid_argument("fraction must lie in (0,1)");
  const int L = whitened.L;
  const long n = whitened.n();
  if (n < 1) throw std::invalid_argument("band limit needs at least one image");
  if (R <= 0) R = L / 2;
  const double c_min = 5.520078110286311 / (2.0 * kPi * R);
  constexpr double kSignificance = 5.0;  // z-score of a ring's excess power

  // Fluctuation spectrum: the sample mean is removed so the mean image does not swamp the excess.
  const Eigen::VectorXd mu = whitened.pixels.rowwise().mean();
  long support = 0;
  for (long p = 0; p < whitened.pixels.rows(); ++p)
    if (whitened.pixels.row(p).squaredNorm() > 0) ++support;
  BandLimitEstimate est;
  est.c = c_min;
  if (support == 0) {
    est.flat_warning = true;
    return est;
  }

  // Rings of width 1/(2L) over the unpadded DFT grid. Zero padding would give the same
  // resolution but leaks strong low-frequency power into the outer plateau.
  const int M = L;
  Eigen::MatrixXd power = Eigen::MatrixXd::Zero(M, M);
  const int chunks = int(std::min<long>(threads(), n));
  std::vector<Eigen::MatrixXd> acc(chunks, Eigen::MatrixXd::Zero(M, M));
  parallel_for(chunks, [&](long cb, long ce) {
    Eigen::FFT<double> fft;
    Eigen::MatrixXcd img(M, M);
    Eigen::VectorXcd tin(M), tout(M);
    for (long ch = cb; ch < ce; ++ch) {
      for (long i = n * ch / chunks; i < n * (ch + 1) / chunks; ++i) {
        for (int row = 0; row < L; ++row) {
          for (int col = 0; col < L; ++col) {
            const long p = long(row) * L + col;
            tin(col) = whitened.pixels(p, i) - mu(p);
          }
          fft.fwd(tout, tin);
          img.row(row) = tout.transpose();
        }
        for (int col = 0; col < M; ++col) {
          tin = img.col(col);
          fft.fwd(tout, tin);
          img.col(col) = tout;
        }
        acc[ch] += img.cwiseAbs2();
      }
    }
  });
  for (auto& a : acc) power += a;
  // centring removes one degree of freedom from the noise
  power /= double(std::max<long>(n - 1, 1)) * double(support);

  const int nb = 2 * M;  // enough for the corner
  std::vector<double> ring(nb, 0.0);
  std::vector<long> cnt(nb, 0);
  for (int u = 0; u < M; ++u)
    for (int v = 0; v < M; ++v) {
      const int fu = u <= M / 2 ? u : u - M, fv = v <= M / 2 ? v : v - M;
      const int b = int(std::lround(2.0 * std::hypot(double(fu), double(fv))));
      if (b >= nb) continue;
      ring[b] += power(u, v);
      ++cnt[b];
    }
  for (int b = 0; b < nb; ++b)
    if (cnt[b]) ring[b] /= cnt[b];
  // The whitened noise floor is nominally 1; estimating the rate from the data biases it up
  // slightly where counts are scarce, so the level is read off the outer plateau instead.
  std::vector<double> plateau;
  for (int b = M / 2; b < M; ++b)
    if (cnt[b]) plateau.push_back(ring[b]);
  double floor_level = 1.0;
  if (!plateau.empty()) {
    std::nth_element(plateau.begin(), plateau.begin() + plateau.size() / 2, plateau.end());
    floor_level = std::max(1.0, plateau[plateau.size() / 2]);
  }
  est.noise_floor = floor_level;
  est.radial_power = ring;

  // Rings whose excess is within noise are dropped: a slight floor bias summed over
  // the many outer rings would otherwise dominate the cumulative total.
  std::vector<double> excess(nb, 0.0);
  bool significant = false;
  for (int b = 0; b < nb; ++b) {
    if (!cnt[b]) continue;
    const double ex = ring[b] / floor_level - 1.0;
    if (ex * std::sqrt(double(n) * cnt[b]) > kSignificance) {
      significant = true;
      excess[b] = ex * cnt[b];
    }
  }
  if (!significant) {
    est.flat_warning = true;
    return est;
  }
  double total = 0.0;
  for (double e : excess) total += e;
  double cum = 0.0;
  for (int b = 0; b < nb; ++b) {
    if (cum + excess[b] >= fraction * total) {
      const double t = excess[b] > 0 ? (fraction * total - cum) / excess[b] : 1.0;
      est.c = std::max(c_min, std::min(0.5, (b - 0.5 + t) / (2.0 * M)));
      return est;
    }
    cum += excess[b];
  }
  est.c = 0.5;
  return est;
}

ImageStack rotate_bilinear(const ImageStack& stack, double alpha) {
  const int L = stack.L, h = L / 2;
  ImageStack out(L, stack.n(), stack.kind);
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  for (int row = 0; row < L; ++row)
    for (int col = 0; col < L; ++col) {
      const double x = col - h, y = row - h;
      // source point R(-alpha) (x, y)
      const double sx = ca * x + sa * y + h, sy = -sa * x + ca * y + h;
      const int c0 = int(std::floor(sx)), r0 = int(std::floor(sy));
      const double fx = sx - c0, fy = sy - r0;
      auto val = [&](int r, int c, long i) { return (r < 0 || r >= L || c < 0 || c >= L) ? 0.0 : stack.at(i, r, c); };
      for (long i = 0; i < stack.n(); ++i)
        out.at(i, row, col) = (1 - fx) * (1 - fy) * val(r0, c0, i) + fx * (1 - fy) * val(r0, c0 + 1, i) +
                              (1 - fx) * fy * val(r0 + 1, c0, i) + fx * fy * val(r0 + 1, c0 + 1, i);
    }
  return out;
}

ImageStack reflect_x(const ImageStack& stack) {
  const int L = stack.L;
  ImageStack out(L, stack.n(), stack.kind);
  for (int row = 0; row < L; ++row)
    for (int col = 1; col < L; ++col) out.pixels.row(long(row) * L + (L - col)) = stack.pixels.row(long(row) * L + col);
  return out;
}

}  // namespace sepca
