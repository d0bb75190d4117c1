// Acceptance run: one PASS/FAIL line per criterion. Exits 0 once every criterion has been
// evaluated; pass --strict to exit 1 when any line is FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sepca/denoise.hpp"
#include "sepca/eval.hpp"
#include "sepca/rank.hpp"
#include "sepca/sepca.hpp"
#include "sepca/synth.hpp"

using namespace sepca;
using cd = std::complex<double>;
using clock_type = std::chrono::steady_clock;

namespace {
constexpr double kPi = std::numbers::pi;
int failures = 0;
std::map<int, std::string> lines;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void report(int id, bool ok, const std::string& detail) {
  lines[id] = fmt("criterion %d: %s  %s", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fprintf(stderr, "%s\n", lines[id].c_str());
  failures += !ok;
}

CoeffBlocks random_coeffs(const FbBasis& b, long n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N;
  CoeffBlocks c = zero_coeffs(b, n);
  for (int k = 0; k <= b.k_max(); ++k)
    for (long i = 0; i < n; ++i)
      for (int q = 0; q < b.p(k); ++q) c.blocks[k](q, i) = k == 0 ? cd(N(rng), 0) : cd(N(rng), N(rng)) / std::sqrt(2.0);
  return c;
}

// Squared norm of image i's coefficients; k > 0 blocks count twice (the conjugate half).
double norm2(const CoeffBlocks& c, long i) {
  double s = 0.0;
  for (size_t k = 0; k < c.blocks.size(); ++k) s += (k ? 2.0 : 1.0) * c.blocks[k].col(i).squaredNorm();
  return s;
}

CoeffBlocks phase(CoeffBlocks c, double alpha) {
  for (size_t k = 0; k < c.blocks.size(); ++k) c.blocks[k] *= std::polar(1.0, -double(k) * alpha);
  return c;
}

double dist2(const CoeffBlocks& a, const CoeffBlocks& b, long i) {
  double s = 0.0;
  for (size_t k = 0; k < a.blocks.size(); ++k) s += (k ? 2.0 : 1.0) * (a.blocks[k].col(i) - b.blocks[k].col(i)).squaredNorm();
  return s;
}

double rel(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1e-300, b.cwiseAbs().maxCoeff());
}

void criterion1() {
  const auto t0 = clock_type::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> lg(-4.0, 1.0), U(0.0, 1.0);
  double worst = 0.0;
  bool below_zero = true;
  for (int t = 0; t < 10000; ++t) {
    const double g = std::pow(10.0, lg(rng));
    const double edge = (1 + std::sqrt(g)) * (1 + std::sqrt(g));
    const double lam = edge * (1.0 + 1e-6 + 20.0 * U(rng));
    worst = std::max(worst, std::abs(spike_forward(shrink_eigenvalue(lam, g), g) - lam) / lam);
    below_zero &= shrink_eigenvalue(edge * U(rng), g) == 0.0 && shrink_eigenvalue(edge, g) == 0.0;
  }
  const double secs = seconds_since(t0);
  report(1, worst <= 1e-10 && below_zero && secs < 1.0,
         fmt("shrinkage inverse: max relative error %.2e, zero below edge %s, %.3f s", worst, below_zero ? "yes" : "no", secs));
}

void criterion2() {
  const auto t0 = clock_type::now();
  const FbBasis b({0.15, 14, 32});
  const Transform tf(b);
  const auto C = random_coeffs(b, 50, 2);
  const auto X = tf.reconstruct(C);
  const auto Xr = tf.reconstruct(tf.expand(X));
  double worst_img = 0.0;
  for (long i = 0; i < 50; ++i) worst_img = std::max(worst_img, (Xr.pixels.col(i) - X.pixels.col(i)).norm() / X.pixels.col(i).norm());
  const double agg_img = (Xr.pixels - X.pixels).norm() / X.pixels.norm();

  // equivariance: rotate by resampling the band-limited function, then compare phases
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 2 * kPi);
  const auto a = tf.expand(X);
  double worst_rot = 0.0, worst_bil = 0.0;
  for (int t = 0; t < 20; ++t) {
    const double alpha = U(rng);
    const auto exact = tf.expand(tf.reconstruct(phase(C, alpha)));
    const auto bil = tf.expand(rotate_bilinear(X, alpha));
    const auto target = phase(a, alpha);
    for (long i = 0; i < 50; ++i) {
      worst_rot = std::max(worst_rot, std::sqrt(dist2(exact, target, i) / norm2(a, i)));
      worst_bil = std::max(worst_bil, std::sqrt(dist2(bil, target, i) / norm2(a, i)));
    }
  }
  const double secs = seconds_since(t0);
  report(2, worst_img <= 1e-2 && worst_rot <= 1e-2 && secs < 30.0,
         fmt("expand/reconstruct error worst %.4f aggregate %.4f (bound 0.01); rotation equivariance %.2e with exact "
             "resampling, %.2e with bilinear rotation; %.1f s",
             worst_img, agg_img, worst_rot, worst_bil, secs));
}

void criterion3() {
  auto cfg = desk_preset();
  cfg.params = {0.3, 7, 16};
  const FbBasis b(cfg.params);
  const Transform tf(b);
  const auto truth = make_model(cfg, tf);
  const auto cell = draw_cell(truth, tf, 200, 5);
  const auto mean = rotinv_mean(cell.counts, tf);
  const auto Z = homogenize(cell.counts, mean);

  // coefficients straight from the polar nonuniform DFT, covariance by explicit sums
  const auto Ad = expand_direct(Z, b);
  const auto Af = tf.expand(Z);
  double err_coef = 0.0, err_cov = 0.0, err_rec = 0.0, err_wf = 0.0;
  for (int k = 0; k <= b.k_max(); ++k) err_coef = std::max(err_coef, rel(Af.blocks[k], Ad.blocks[k]));
  const auto cov = block_covariance(center_zero_frequency(Af), true);
  const long n = Ad.n();
  for (int k = 0; k <= b.k_max(); ++k) {
    const int p = b.p(k);
    Eigen::MatrixXcd ref(p, p);
    Eigen::VectorXcd mu = Eigen::VectorXcd::Zero(p);
    if (k == 0)
      for (long i = 0; i < n; ++i) mu += Ad.blocks[0].col(i) / double(n);
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < p; ++c) {
        double s = 0.0;
        for (long i = 0; i < n; ++i) s += ((Ad.blocks[k](r, i) - mu(r)) * std::conj(Ad.blocks[k](c, i) - mu(c))).real();
        ref(r, c) = s / double(n);
      }
    err_cov = std::max(err_cov, rel(cov.blocks[k], ref));
  }
  const auto sh = shrink_block(cov);
  const auto rm = recolor_matrices(mean, b);
  const auto rec = recolor_block(sh, rm);
  for (int k = 0; k <= b.k_max(); ++k) {
    const int p = b.p(k);
    Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j)
        for (int x = 0; x < p; ++x)
          for (int y = 0; y < p; ++y) ref(i, j) += rm.B[k](x, i) * sh.blocks[k](x, y) * rm.B[k](y, j);
    if (ref.cwiseAbs().maxCoeff() > 0) err_rec = std::max(err_rec, rel(rec.blocks[k], ref));
  }
  const auto fin = scale_block(rec, rm, sh);
  const auto den = wiener_denoise(Af, fin.blocks, rm, mean.coeffs);
  for (int k = 0; k <= b.k_max(); ++k) {
    const Eigen::MatrixXcd D = rm.D[k].cast<cd>(), B = rm.B[k].cast<cd>();
    const Eigen::MatrixXcd Minv = (D + fin.blocks[k]).inverse();
    Eigen::MatrixXcd ref = fin.blocks[k] * Minv * B * Af.blocks[k];
    if (k == 0) ref.colwise() += D * Minv * mean.coeffs.cast<cd>();
    err_wf = std::max(err_wf, rel(den.blocks[k], ref));
  }
  const double worst = std::max({err_coef, err_cov, err_rec, err_wf});
  report(3, worst <= 1e-10,
         fmt("16x16 oracles: coefficients %.1e, S_h %.1e, recolouring %.1e, Wiener %.1e (relative max entry)", err_coef,
             err_cov, err_rec, err_wf));
}

void criterion4() {
  const FbBasis b({0.15, 14, 32});
  const Transform tf(b);
  const auto truth = make_model(desk_preset(), tf);
  const auto model = estimate_sepca(draw_cell(truth, tf, 2000, 6).counts, tf);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-13.9, 13.9), A(0.0, 2 * kPi);
  double worst = 0.0, scale = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::array<double, 2> p{U(rng), U(rng)}, q{U(rng), U(rng)};
    const double a = A(rng), c = std::cos(a), s = std::sin(a);
    const auto K1 = covariance_kernel(model.cov, b, {p, q});
    const auto K2 = covariance_kernel(model.cov, b, {{c * p[0] - s * p[1], s * p[0] + c * p[1]}, {c * q[0] - s * q[1], s * q[0] + c * q[1]}});
    worst = std::max(worst, std::abs(K1(0, 1) - K2(0, 1)));
    scale = std::max(scale, std::abs(K1(0, 1)));
  }
  report(4, worst <= 1e-8, fmt("kernel rotation invariance: max difference %.2e over 100 pairs (largest entry %.2e)", worst, scale));
}

// Criteria 5 and 7 share the n = 5000 runs.
void criteria5and7() {
  const auto t0 = clock_type::now();
  const FbBasis b({0.15, 14, 32});
  const Transform tf(b);
  const auto truth = make_model(desk_preset(), tf);
  const Eigen::MatrixXd Ctrue = true_covariance(truth, tf);
  int better = 0, rank_ok = 0;
  std::string ranks;
  double worst_ratio = 0.0;
  for (int s = 0; s < 10; ++s) {
    const auto cell = draw_cell(truth, tf, 5000, 100 + s);
    const auto model = estimate_sepca(cell.counts, tf);
    const double e_s = covariance_error(covariance_kernel_grid(model.cov, tf), Ctrue).fro;
    const double e_r = covariance_error(sample_covariance(cell.counts), Ctrue).fro;
    better += e_s <= 0.5 * e_r;
    worst_ratio = std::max(worst_ratio, e_s / e_r);
    const int r = model.total_rank();
    rank_ok += r >= 4 && r <= 8;
    ranks += std::to_string(r) + (s < 9 ? "," : "");
  }
  const double secs = seconds_since(t0);
  report(5, better >= 8 && secs < 300.0,
         fmt("sePCA Frobenius error <= 0.5x raw in %d/10 seeds (largest ratio %.4f), %.0f s", better, worst_ratio, secs));

  auto zcfg = desk_preset();
  zcfg.snr = 0.0;
  const auto ztruth = make_model(zcfg, tf);
  int zero = 0;
  std::string zranks;
  for (int s = 0; s < 10; ++s) {
    const int r = estimate_sepca(draw_cell(ztruth, tf, 5000, 200 + s).counts, tf).total_rank();
    zero += r == 0;
    zranks += std::to_string(r) + (s < 9 ? "," : "");
  }
  report(7, rank_ok >= 8 && zero >= 9,
         fmt("total rank in [4,8] in %d/10 seeds (%s); zero signal gives rank 0 in %d/10 (%s)", rank_ok, ranks.c_str(), zero,
             zranks.c_str()));
}

void criterion6() {
  const auto t0 = clock_type::now();
  ComparisonConfig cfg;
  cfg.methods = {"raw", "epca", "sepca"};
  cfg.n_grid = {1000};
  cfg.seeds = 10;
  cfg.covariance = false;
  cfg.base_seed = 300;
  const auto rep = run_comparison(cfg);
  std::map<std::uint64_t, std::map<std::string, double>> m;
  for (const auto& r : rep.rows) m[r.seed][r.method] = r.mse;
  int ok = 0;
  for (auto& [s, v] : m) ok += v["sepca"] < v["raw"] && v["sepca"] <= v["epca"];

  ComparisonConfig tr = cfg;
  tr.methods = {"sepca"};
  tr.n_grid = {100, 1000, 10000};
  const auto rep2 = run_comparison(tr);
  std::map<long, std::vector<double>> by_n;
  for (const auto& r : rep2.rows) by_n[r.n].push_back(r.mse);
  std::vector<double> med;
  for (auto& [n, v] : by_n) {
    std::sort(v.begin(), v.end());
    med.push_back(0.5 * (v[4] + v[5]));
  }
  const bool mono = med[1] <= 1.05 * med[0] && med[2] <= 1.05 * med[1];
  const double secs = seconds_since(t0);
  report(6, ok >= 8 && mono && secs < 600.0,
         fmt("MSE(sePCA) < raw and <= ePCA in %d/10 seeds; median MSE at n=100,1000,10000: %.3e %.3e %.3e; %.0f s", ok,
             med[0], med[1], med[2], secs));
}

void criterion8() {
  const FbBasis b({0.15, 14, 32});
  const Transform tf(b);
  const auto truth = make_model(desk_preset(), tf);
  auto time_at = [&](long n) {
    const auto counts = draw_cell(truth, tf, n, 400).counts;
    double best = 1e300;
    for (int r = 0; r < 3; ++r) {
      const auto t0 = clock_type::now();
      const auto model = estimate_sepca(counts, tf);
      best = std::min(best, seconds_since(t0));
    }
    return best;
  };
  const double t3 = time_at(1000), t4 = time_at(10000);
  const double ratio = t4 / t3;
  report(8, ratio <= 13.0, fmt("estimate time %.1f ms at n=1e3, %.1f ms at n=1e4, ratio %.2f (bound 13)", 1e3 * t3, 1e3 * t4, ratio));
}

void criterion9() {
  int zero = 0;
  for (int s = 0; s < 100; ++s) {
    std::mt19937_64 rng(9000 + s);
    std::normal_distribution<double> N;
    Eigen::MatrixXd X(64, 500);
    for (auto& v : X.reshaped()) v = N(rng);
    X = X.colwise() - X.rowwise().mean();
    zero += permutation_rank(X, 0.1, 30, s).rank == 0;
  }
  report(9, zero >= 90, fmt("pure-noise 64x500: rank 0 in %d/100 seeds (bound 90; exchangeability gives 27/31 = 87.1%%)", zero));
}
}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criteria5and7();
  criterion6();
  criterion8();
  criterion9();
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("%d criteria failed\n", failures);
  return strict && failures ? 1 : 0;
}
