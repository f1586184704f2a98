#include "mii/graph.hpp"

#include <stdexcept>

namespace mii {

Graph::Id Graph::push(Node n) {
  n.adjoint = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

Graph::Id Graph::constant(Eigen::MatrixXd value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Graph::Id Graph::variable(Eigen::MatrixXd value) {
  Node n;
  n.op = Op::variable;
  n.value = std::move(value);
  return push(std::move(n));
}

Graph::Id Graph::lincomb(const std::vector<std::pair<Id, double>>& terms) {
  if (terms.empty()) throw std::invalid_argument("Graph::lincomb: no terms");
  Node n;
  n.op = Op::lincomb;
  n.terms = terms;
  n.value = terms[0].second * value(terms[0].first);
  for (std::size_t k = 1; k < terms.size(); ++k) {
    const auto& v = value(terms[k].first);
    if (v.rows() != n.value.rows() || v.cols() != n.value.cols())
      throw std::invalid_argument("Graph::lincomb: shape mismatch");
    n.value += terms[k].second * v;
  }
  return push(std::move(n));
}

Graph::Id Graph::right_multiply(Id a, Sparse S) {
  if (value(a).cols() != S.rows()) throw std::invalid_argument("Graph::right_multiply: shape mismatch");
  Node n;
  n.op = Op::right_multiply;
  n.terms = {{a, 1.0}};
  n.value = value(a) * S;
  n.S = std::move(S);
  return push(std::move(n));
}

Graph::Id Graph::mask_rows(Id a, int begin, int count) {
  Node n;
  n.op = Op::mask_rows;
  n.terms = {{a, 1.0}};
  n.begin = begin;
  n.count = count;
  n.value = Eigen::MatrixXd::Zero(value(a).rows(), value(a).cols());
  n.value.middleRows(begin, count) = value(a).middleRows(begin, count);
  return push(std::move(n));
}

Graph::Id Graph::field(Id a, const DifferentiableField& f) {
  Node n;
  n.op = Op::field;
  n.terms = {{a, 1.0}};
  n.f = &f;
  n.value = f.field(value(a));
  field_columns_ += value(a).cols();
  return push(std::move(n));
}

double Graph::set_loss(const std::vector<std::pair<Id, double>>& terms) {
  loss_terms_ = terms;
  double loss = 0;
  for (const auto& [id, w] : terms) loss += w * value(id).squaredNorm();
  return loss;
}

void Graph::backward() {
  for (auto& n : nodes_) n.adjoint.setZero();
  theta_bar_.setZero();
  for (const auto& [id, w] : loss_terms_) nodes_[static_cast<std::size_t>(id)].adjoint += 2.0 * w * value(id);

  for (auto i = static_cast<std::ptrdiff_t>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.adjoint.isZero(0.0)) continue;
    switch (n.op) {
      case Op::constant:
      case Op::variable:
        break;
      case Op::lincomb:
        for (const auto& [id, w] : n.terms) nodes_[static_cast<std::size_t>(id)].adjoint += w * n.adjoint;
        break;
      case Op::right_multiply:
        nodes_[static_cast<std::size_t>(n.terms[0].first)].adjoint += n.adjoint * n.S.transpose();
        break;
      case Op::mask_rows:
        nodes_[static_cast<std::size_t>(n.terms[0].first)].adjoint.middleRows(n.begin, n.count) +=
            n.adjoint.middleRows(n.begin, n.count);
        break;
      case Op::field: {
        Node& in = nodes_[static_cast<std::size_t>(n.terms[0].first)];
        in.adjoint += n.f->field_vjp(in.value, n.adjoint, theta_bar_.size() ? &theta_bar_ : nullptr);
        break;
      }
    }
  }
}

}  // namespace mii
