#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sepca/sepca.hpp"
#include "sepca/transform.hpp"

namespace sepca {

// Per-block affine filter A -> F A (+ mean term for k = 0).
struct WienerFilter {
  std::vector<Eigen::MatrixXcd> F;  // S (D + S)^{-1} B
  Eigen::VectorXcd mean_term;       // D0 (D0 + S0)^{-1} abar
  bool ridge_warning = false;
};

WienerFilter wiener_filter(const std::vector<Eigen::MatrixXcd>& S, const RecolorMatrices& rm,
                           const Eigen::VectorXd& mean_coeffs);

// coeffs are expansion coefficients of the prewhitened images, not centred.
CoeffBlocks wiener_denoise(const CoeffBlocks& coeffs, const std::vector<Eigen::MatrixXcd>& S,
                           const RecolorMatrices& rm, const Eigen::VectorXd& mean_coeffs, bool* ridge_warning = nullptr);

ImageStack denoise_stack(const ImageStack& stack, const SepcaModel& model, const Transform& tf);

// Cartesian baselines. Matrices index pixels row-major over the full L x L grid.

Eigen::MatrixXd sample_covariance(const ImageStack& stack);

// X = mean + S (S + (1-eps) diag(mean) + eps m I)^{-1} (Y - mean), m the average of `mean`.
ImageStack eblp_denoise_cartesian(const ImageStack& stack, const Eigen::MatrixXd& S, const Eigen::VectorXd& mean,
                                  double epsilon = 0.1);

ImageStack pca_project_denoise(const ImageStack& stack, int n_components);

struct CartesianEstimate {
  Eigen::MatrixXd cov;   // L^2 x L^2
  Eigen::VectorXd mean;  // L^2
  int rank = 0;
};

// Sample covariance truncated to its leading n_components eigenpairs.
CartesianEstimate pca_cartesian(const ImageStack& stack, int n_components);

// Cartesian ePCA: diagonal homogenisation, shrinkage, recolouring and scaling on
// the pixels with positive mean count.
CartesianEstimate epca_cartesian(const ImageStack& counts);

}  // namespace sepca
