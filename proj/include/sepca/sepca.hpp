#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "sepca/fb_basis.hpp"
#include "sepca/transform.hpp"

namespace sepca {

struct RotInvMean {
  Eigen::VectorXd coeffs;         // k = 0 coefficients of the sample mean, by q
  Eigen::VectorXd pixel_profile;  // f(x,y) on all L*L pixels, zero outside the disk
  Eigen::VectorXd node_profile;   // f(r_j) at the real-domain radial nodes
};

RotInvMean rotinv_mean(const ImageStack& stack, const Transform& tf);
// Same mean coefficients, but a flat noise profile equal to the mean count over the disk.
RotInvMean flat_noise_mean(const RotInvMean& mean, const Transform& tf);

// 1/sqrt(f) per pixel, zero where f vanishes.
Eigen::VectorXd whitening_scale(const RotInvMean& mean);
ImageStack homogenize(const ImageStack& stack, const RotInvMean& mean);
CoeffBlocks center_zero_frequency(const CoeffBlocks& coeffs);

struct BlockCovariance {
  std::vector<Eigen::MatrixXcd> blocks;
  std::vector<Eigen::VectorXd> eigenvalues;    // descending
  std::vector<Eigen::MatrixXcd> eigenvectors;  // columns follow eigenvalues
  std::vector<double> gamma;
  std::vector<int> rank;

  int k_max() const { return int(blocks.size()) - 1; }
  int total_rank() const;
};

// Fills eigenvalues/eigenvectors of every block; tiny negatives are clamped to 0.
void attach_eigen(BlockCovariance& cov);

// S^(k) = Re(A A^*) / n with reflections, A A^* / n without.
BlockCovariance block_covariance(const CoeffBlocks& centered, bool reflections = true);

double spike_forward(double ell, double gamma);
double shrink_eigenvalue(double lambda, double gamma);
double cosine_sq(double ell, double gamma);

// Eigenvalues replaced by their shrunken values; rank[k] counts the nonzero ones.
BlockCovariance shrink_block(const BlockCovariance& cov);

struct RecolorMatrices {
  std::vector<Eigen::MatrixXd> B, D;
};

RecolorMatrices recolor_matrices(const RotInvMean& mean, const FbBasis& basis);

// B^T S B per block.
BlockCovariance recolor_block(const BlockCovariance& shrunken, const RecolorMatrices& rm);

struct BlockDiagnostics {
  std::vector<double> ell, cos2, tau, t, alpha;
};

// Eigenvalue scaling of the recolored blocks. Components with alpha <= 0 are dropped.
BlockCovariance scale_block(const BlockCovariance& recolored, const RecolorMatrices& rm,
                            const BlockCovariance& shrunken, std::vector<BlockDiagnostics>* diag = nullptr);

// Kernel between every pair of the given Cartesian points (x, y); zero outside the disk.
Eigen::MatrixXd covariance_kernel(const std::vector<Eigen::MatrixXcd>& blocks, const FbBasis& basis,
                                  const std::vector<std::array<double, 2>>& points);
// Kernel on the full L*L pixel grid.
Eigen::MatrixXd covariance_kernel_grid(const std::vector<Eigen::MatrixXcd>& blocks, const Transform& tf);

struct SepcaOptions {
  bool reflections = true;
  bool whiten = true;  // false gives steerable PCA with a flat noise level
};

struct SepcaModel {
  BasisParams params;
  int radial_oversample = 4;
  SepcaOptions options;
  long n = 0;
  RotInvMean mean;
  RecolorMatrices rm;
  std::vector<Eigen::MatrixXcd> cov;  // final S_s^(k)
  std::vector<int> ranks;             // final per-k ranks
  std::vector<int> shrink_ranks;      // ranks after eigenvalue shrinkage
  std::vector<double> gamma;
  std::vector<BlockDiagnostics> diag;

  int total_rank() const;
};

SepcaModel estimate_sepca(const ImageStack& counts, const Transform& tf, const SepcaOptions& opt = {});

}  // namespace sepca
