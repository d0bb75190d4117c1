#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sepca/synth.hpp"
#include "sepca/transform.hpp"

namespace sepca {

struct CovarianceError {
  double op = 0.0;
  double fro = 0.0;
};

CovarianceError covariance_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth);

// (pn)^{-1} sum_i ||A_i - B_i||^2 with p = L^2.
double mse(const ImageStack& denoised, const ImageStack& clean);

struct ComparisonConfig {
  ModelConfig model = desk_preset();
  std::optional<GroundTruthModel> truth;  // overrides building the model from `model`
  std::vector<long> n_grid = {100, 1000};
  int seeds = 5;
  std::uint64_t base_seed = 0;
  std::vector<std::string> methods = {"pca", "spca", "epca", "sepca"};
  bool covariance = true;
  int n_perm = 30;
  double rho = 0.1;
};

struct ReportRow {
  std::string method;
  long n = 0;
  std::uint64_t seed = 0;
  double op_err = 0.0, fro_err = 0.0, mse = 0.0;
  int rank_total = 0;
  double wall_ms = 0.0;
};

struct PipelineReport {
  BasisParams params;
  int true_rank = 0;
  double clip_rate = 0.0;
  std::vector<ReportRow> rows;
};

// Methods: pca, spca, epca, sepca, and raw (sample covariance / noisy counts).
PipelineReport run_comparison(const ComparisonConfig& cfg);

std::string report_csv(const PipelineReport& report);
// Medians and min/max per (method, n), as JSON text.
std::string report_summary_json(const PipelineReport& report);

// Poisson counts and clean images for one (n, seed) cell of a comparison.
struct Cell {
  ImageStack clean, counts;
  double clip_rate = 0.0;
};
Cell draw_cell(const GroundTruthModel& truth, const Transform& tf, long n, std::uint64_t seed);

}  // namespace sepca
