#include "mii/mii_operator.hpp"

#include <stdexcept>

namespace mii {

MiiOperator build_uw(int N) {
  if (N < 1) throw std::invalid_argument("build_uw: N must be >= 1");
  MiiOperator op;
  op.N = N;
  op.U = Eigen::MatrixXd::Ones(N + 1, N + 1);
  op.U.diagonal().setZero();
  op.W.resize(N + 1, N);
  for (int i = 1; i <= N + 1; ++i)
    for (int j = 1; j <= N; ++j) op.W(i - 1, j - 1) = j >= i ? j - 1 - N : j;
  return op;
}

Eigen::MatrixXd mii_combine(const MiiOperator& op, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& psi,
                            double h) {
  if (Y.rows() != op.N + 1 || psi.rows() != op.N || psi.cols() != Y.cols())
    throw std::invalid_argument("mii_combine: dimension mismatch");
  return (op.U * Y + h * (op.W * psi)) / op.N;
}

Eigen::MatrixXd mii_apply(const MiiOperator& op, const Trajectory& data, const MirkTableau& m,
                          const VectorField& f) {
  if (data.steps() != op.N) throw std::invalid_argument("mii_apply: trajectory length does not match N");
  const Eigen::MatrixXd psi = mirk_trajectory_increments(m, f, data.points, data.h, true);
  return mii_combine(op, data.points, psi, data.h);
}

}  // namespace mii
