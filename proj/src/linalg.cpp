#include "mii/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace mii {

double spectral_norm(const Eigen::MatrixXd& A, const PowerIterationSettings& settings) {
  if (A.size() == 0) return 0.0;
  const Eigen::MatrixXd B = A.transpose() * A;
  const auto n = B.rows();
  // Deterministic start with unequal components so it is not orthogonal to the top eigenvector.
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = 1.0 + 0.1 * static_cast<double>(i + 1) / static_cast<double>(n);
  x.normalize();
  double lambda = x.dot(B * x);
  for (int it = 0; it < settings.max_iterations; ++it) {
    Eigen::VectorXd y = B * x;
    const double ny = y.norm();
    if (ny == 0.0) return 0.0;
    x = y / ny;
    const double next = x.dot(B * x);
    const bool done = std::abs(next - lambda) <= settings.tolerance * std::max(std::abs(next), 1e-300);
    lambda = next;
    if (done) break;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& X) {
  if (X.cols() < 2) throw std::invalid_argument("sample_covariance: need at least two samples");
  const Eigen::VectorXd mean = X.rowwise().mean();
  const Eigen::MatrixXd C = X.colwise() - mean;
  Eigen::MatrixXd cov = (C * C.transpose()) / static_cast<double>(X.cols() - 1);
  return 0.5 * (cov + cov.transpose());
}

}  // namespace mii
