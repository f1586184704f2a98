#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <string>

namespace mii {

/// Canonical Hamiltonian system on y = [q, p] in R^{2d}.
struct HamiltonianSystem {
  std::string name;
  int d = 0;
  std::function<double(const Eigen::VectorXd&)> H;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hess;  // may be empty
  bool separable = false;
  std::map<std::string, double> params;

  int dim() const { return 2 * d; }
  bool has_hessian() const { return static_cast<bool>(hess); }

  /// f(y) = J grad H(y).
  Eigen::VectorXd field(const Eigen::VectorXd& y) const;
  /// Hessian of H; central differences of grad when no analytic form exists.
  Eigen::MatrixXd hessian(const Eigen::VectorXd& y) const;
  /// f'(y) = J Hess H(y).
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& y) const;
};

/// J = [[0, I], [-I, 0]] of size 2d.
Eigen::MatrixXd canonical_J(int d);
/// J x without forming J.
Eigen::VectorXd apply_J(const Eigen::VectorXd& x);
/// J M without forming J.
Eigen::MatrixXd apply_J(const Eigen::MatrixXd& M);

/// FPUT chain with m stiff springs; m = 1, omega = 2 in the experiments.
HamiltonianSystem fput(int m = 1, double omega = 2.0);
HamiltonianSystem double_pendulum();
HamiltonianSystem henon_heiles();
/// H = 1/2 y^T S y with S symmetric.
HamiltonianSystem quadratic_system(const Eigen::MatrixXd& S);
/// H = 0 in R^{2d}.
HamiltonianSystem zero_system(int d);

/// "fput", "double_pendulum", "henon_heiles". Throws std::invalid_argument.
HamiltonianSystem system_by_name(const std::string& name);

}  // namespace mii
