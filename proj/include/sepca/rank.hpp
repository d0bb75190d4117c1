#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace sepca {

struct RankEstimate {
  int rank = 0;
  double threshold = 0.0;
  double rho = 0.1;
  int n_permutations = 30;
  std::vector<double> singular_values;  // leading singular values of the data, descending
};

// Parallel-analysis rank: each variable (row) is permuted independently across
// observations (columns); the threshold is the ceil((1-rho) n_perm)-th smallest
// of the replicate top singular values.
RankEstimate permutation_rank(const Eigen::Ref<const Eigen::MatrixXd>& data, double rho = 0.1, int n_perm = 30,
                              std::uint64_t seed = 0);

int mp_edge_rank(const std::vector<double>& eigenvalues, double gamma);

// Leading singular values of X (at most `count`), descending.
std::vector<double> top_singular_values(const Eigen::Ref<const Eigen::MatrixXd>& X, int count);

}  // namespace sepca
