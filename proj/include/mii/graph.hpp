#pragma once

#include "mii/differentiable_field.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <utility>
#include <vector>

namespace mii {

/// Reverse-mode tape over matrix-valued nodes (columns are samples). Built once
/// per loss evaluation: record operations, call set_loss, then backward.
class Graph {
 public:
  using Id = int;
  using Sparse = Eigen::SparseMatrix<double>;

  /// `num_parameters` sizes the parameter cotangent accumulated by field nodes.
  explicit Graph(int num_parameters = 0) : theta_bar_(Eigen::VectorXd::Zero(num_parameters)) {}

  Id constant(Eigen::MatrixXd value);
  Id variable(Eigen::MatrixXd value);
  /// sum_k w_k * node_k; all terms must share a shape.
  Id lincomb(const std::vector<std::pair<Id, double>>& terms);
  /// node * S.
  Id right_multiply(Id a, Sparse S);
  /// Keeps rows [begin, begin + count), zeroes the rest.
  Id mask_rows(Id a, int begin, int count);
  /// Columnwise f(node). The field must outlive the graph.
  Id field(Id a, const DifferentiableField& f);

  const Eigen::MatrixXd& value(Id a) const { return nodes_[static_cast<std::size_t>(a)].value; }
  const Eigen::MatrixXd& adjoint(Id a) const { return nodes_[static_cast<std::size_t>(a)].adjoint; }

  /// loss = sum_k w_k ||node_k||_F^2.
  double set_loss(const std::vector<std::pair<Id, double>>& terms);
  void backward();

  const Eigen::VectorXd& parameter_gradient() const { return theta_bar_; }
  long field_evaluations() const { return field_columns_; }

 private:
  enum class Op { constant, variable, lincomb, right_multiply, mask_rows, field };
  struct Node {
    Op op = Op::constant;
    std::vector<std::pair<Id, double>> terms;
    Sparse S;
    int begin = 0, count = 0;
    const DifferentiableField* f = nullptr;
    Eigen::MatrixXd value;
    Eigen::MatrixXd adjoint;
  };
  std::vector<Node> nodes_;
  std::vector<std::pair<Id, double>> loss_terms_;
  Eigen::VectorXd theta_bar_;
  long field_columns_ = 0;

  Id push(Node n);
};

}  // namespace mii
