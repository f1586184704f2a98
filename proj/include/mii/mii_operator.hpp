#pragma once

#include "mii/integrators.hpp"
#include "mii/tableau.hpp"
#include "mii/vector_field.hpp"

#include <Eigen/Dense>

namespace mii {

/// Averaging matrices of the mean inverse integrator for N steps.
struct MiiOperator {
  int N = 0;
  Eigen::MatrixXd U;  // (N+1) x (N+1), zero diagonal, ones elsewhere
  Eigen::MatrixXd W;  // (N+1) x N, W_ij = j-1-N if j >= i else j (1-based)
};

/// Throws std::invalid_argument for N < 1.
MiiOperator build_uw(int N);

/// (U Y + h W Psi) / N with Y of size (N+1) x 2d and Psi of size N x 2d.
Eigen::MatrixXd mii_combine(const MiiOperator& op, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& psi,
                            double h);

/// Averaged states Y_bar; row n approximates y(t_n).
Eigen::MatrixXd mii_apply(const MiiOperator& op, const Trajectory& data, const MirkTableau& m,
                          const VectorField& f);

}  // namespace mii
