#pragma once

#include <Eigen/Dense>

namespace mii {

struct PowerIterationSettings {
  double tolerance = 1e-10;
  int max_iterations = 10000;
};

/// ||A||_2 by power iteration on A^T A. For symmetric A this is the spectral radius.
double spectral_norm(const Eigen::MatrixXd& A, const PowerIterationSettings& settings = {});

/// Unbiased sample covariance of the columns of X (rows are variables).
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& X);

}  // namespace mii
