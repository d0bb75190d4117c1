#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sepca/fb_basis.hpp"

namespace sepca {

enum class StackKind { Counts, Intensity };

// n images of L x L pixels. Column i holds image i; pixel (row, col) sits at
// index row * L + col and has coordinates x = col - L/2, y = row - L/2.
struct ImageStack {
  int L = 0;
  StackKind kind = StackKind::Intensity;
  Eigen::MatrixXd pixels;

  ImageStack() = default;
  ImageStack(int L_, long n, StackKind k = StackKind::Intensity)
      : L(L_), kind(k), pixels(Eigen::MatrixXd::Zero(long(L_) * L_, n)) {}
  long n() const { return pixels.cols(); }
  double& at(long i, int row, int col) { return pixels(long(row) * L + col, i); }
  double at(long i, int row, int col) const { return pixels(long(row) * L + col, i); }
};

// Per-frequency coefficient matrices A^(k), k = 0..k_max, each p_k x n.
struct CoeffBlocks {
  std::vector<Eigen::MatrixXcd> blocks;
  long n() const { return blocks.empty() ? 0 : blocks[0].cols(); }
};

CoeffBlocks zero_coeffs(const FbBasis& basis, long n);

struct PixelGeometry {
  std::vector<int> index;  // flat pixel indices
  std::vector<double> x, y, r, phi;
};

// Pixels of the square window [-R, R-1]^2.
PixelGeometry window_pixels(const BasisParams& p);
// Pixels with radius strictly below R.
PixelGeometry disk_pixels(const BasisParams& p);

// Direct nonuniform DFT on the polar grid, including the 1/(2R) prefactor.
// Result is n_xi x n_theta.
Eigen::MatrixXcd polar_fourier_samples(const Eigen::Ref<const Eigen::VectorXd>& image, const FbBasis& basis);

// Reference expansion through the polar samples. Slow; used as an oracle.
CoeffBlocks expand_direct(const ImageStack& stack, const FbBasis& basis);

// Dense analysis/synthesis operators built once per basis.
class Transform {
 public:
  explicit Transform(const FbBasis& basis);

  const FbBasis& basis() const { return basis_; }
  const PixelGeometry& window() const { return window_; }
  const PixelGeometry& disk() const { return disk_; }

  CoeffBlocks expand(const ImageStack& stack) const;
  CoeffBlocks expand(const Eigen::Ref<const Eigen::MatrixXd>& pixels) const;
  // Expansion of diag(pixel_scale) * pixels without forming the scaled stack.
  CoeffBlocks expand(const Eigen::Ref<const Eigen::MatrixXd>& pixels, const Eigen::VectorXd& pixel_scale) const;
  ImageStack reconstruct(const CoeffBlocks& coeffs, StackKind kind = StackKind::Intensity) const;

  // Synthesis columns g_{k,q}(x) = i^k h_{k,q}(r) e^{i k phi} on disk pixels (disk x half_dim).
  const Eigen::MatrixXcd& synthesis() const { return synth_; }

 private:
  FbBasis basis_;
  PixelGeometry window_, disk_;
  Eigen::MatrixXd ana_re_, ana_im_;      // half_dim x window
  Eigen::MatrixXcd synth_;                // disk x half_dim
  Eigen::MatrixXd syn_re_, syn_im_;      // disk x half_dim, with the 1/2 weights folded in
};

// Smallest integer R whose disk holds `fraction` of the mean image mass.
int estimate_support_radius(const ImageStack& stack, double fraction = 0.999);

struct BandLimitEstimate {
  double c = 0.0;
  bool flat_warning = false;
  double noise_floor = 1.0;          // plateau level used in place of the nominal 1
  std::vector<double> radial_power;  // mean power per ring of width 1/(2L) (nominal floor 1)
};

// Band limit from the radial power spectrum of prewhitened, mean-removed images. The noise floor
// is the median ring power over 0.25..0.5 cycles per pixel (never below 1).
// R is only used for the minimum admissible c; 0 means L/2.
BandLimitEstimate estimate_band_limit(const ImageStack& whitened, double fraction = 0.999, int R = 0);

// Prewhitening without a basis: divide by the square root of the radially averaged mean.
ImageStack radial_whiten(const ImageStack& stack);

// Rotate every image counter-clockwise by alpha about the grid centre (bilinear).
ImageStack rotate_bilinear(const ImageStack& stack, double alpha);
// Mirror x -> -x about the grid centre.
ImageStack reflect_x(const ImageStack& stack);

}  // namespace sepca
