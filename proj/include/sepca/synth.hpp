#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sepca/transform.hpp"

namespace sepca {

struct ModelConfig {
  BasisParams params;
  double mean_count = 0.05;        // mean photon count per pixel over the L x L grid
  std::vector<int> ranks;          // signal rank per angular frequency k = 0, 1, ...
  std::vector<double> spectrum;    // relative eigenvalues, consumed in block order
  double snr = 1.0;                // multiplies every signal eigenvalue
  double signal_radius = 0.85;     // clean images vanish for r >= signal_radius * R
  double ring_fraction = 0.7;      // the mean profile is kept flat-ish on r <= ring_fraction * R
  double max_clip_rate = 0.01;
  std::uint64_t seed = 0;
};

ModelConfig desk_preset();
ModelConfig paper_preset();
ModelConfig preset(const std::string& name);

struct GroundTruthModel {
  BasisParams params;
  Eigen::VectorXd mean_coeffs;       // k = 0, real
  std::vector<Eigen::MatrixXd> sigma;  // per k, p_k x p_k PSD
  double intensity_scale = 0.05;
  double signal_radius = 0.85;
  double clip_rate = 0.0;            // negative mass / positive mass on a pilot draw
  std::uint64_t seed = 0;

  int total_rank() const;
};

// Builds the preset model: a non-negative ring-shaped mean from a small LP and
// per-k signal eigenvectors that fluctuate least where the mean is dim.
// Throws DataError when the pilot clip rate exceeds cfg.max_clip_rate.
GroundTruthModel make_model(const ModelConfig& cfg, const Transform& tf);

// Coefficients with per-k covariance sigma and a uniform random rotation per image.
CoeffBlocks draw_coefficients(const GroundTruthModel& model, const FbBasis& basis, long n, std::uint64_t seed);

struct CleanDraw {
  ImageStack images;
  CoeffBlocks coeffs;
  double clip_rate = 0.0;
};

CleanDraw draw_clean_stack(const GroundTruthModel& model, const Transform& tf, long n, std::uint64_t seed);

ImageStack poisson_observe(const ImageStack& clean, std::uint64_t seed);

// Exact covariance of the (unclipped) clean images on the full grid, L^2 x L^2.
Eigen::MatrixXd true_covariance(const GroundTruthModel& model, const Transform& tf);
Eigen::MatrixXd true_covariance(const GroundTruthModel& model, const FbBasis& basis,
                                const std::vector<std::array<double, 2>>& points);

// The clean mean image (masked, unclipped).
Eigen::VectorXd mean_image(const GroundTruthModel& model, const Transform& tf);

}  // namespace sepca
