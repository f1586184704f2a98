#pragma once

#include "mii/systems.hpp"

#include <Eigen/Dense>

namespace mii {

/// Batched vector field f(x) = J grad H(x) whose vector-Jacobian products with
/// respect to x and to its parameters are available. Columns are samples.
class DifferentiableField {
 public:
  virtual ~DifferentiableField() = default;
  virtual int dim() const = 0;
  virtual int num_parameters() const = 0;
  virtual Eigen::MatrixXd field(const Eigen::MatrixXd& X) const = 0;
  /// Given the cotangent F_bar of field(X), returns X_bar and adds the parameter
  /// cotangent to *theta_bar (skipped when null).
  virtual Eigen::MatrixXd field_vjp(const Eigen::MatrixXd& X, const Eigen::MatrixXd& F_bar,
                                    Eigen::VectorXd* theta_bar) const = 0;
};

/// Exact field of a known system; no parameters.
class SystemField final : public DifferentiableField {
 public:
  explicit SystemField(HamiltonianSystem sys) : sys_(std::move(sys)) {}
  int dim() const override { return sys_.dim(); }
  int num_parameters() const override { return 0; }
  Eigen::MatrixXd field(const Eigen::MatrixXd& X) const override {
    Eigen::MatrixXd F(X.rows(), X.cols());
    for (Eigen::Index k = 0; k < X.cols(); ++k) F.col(k) = sys_.field(X.col(k));
    return F;
  }
  Eigen::MatrixXd field_vjp(const Eigen::MatrixXd& X, const Eigen::MatrixXd& F_bar,
                            Eigen::VectorXd*) const override {
    // f' = J Hess, so f'^T F_bar = Hess J^T F_bar = -Hess J F_bar.
    Eigen::MatrixXd Xb(X.rows(), X.cols());
    const Eigen::MatrixXd JF = apply_J(F_bar);
    for (Eigen::Index k = 0; k < X.cols(); ++k) Xb.col(k) = -(sys_.hessian(X.col(k)) * JF.col(k));
    return Xb;
  }

 private:
  HamiltonianSystem sys_;
};

}  // namespace mii
