#include "mii/vector_field.hpp"

#include <cmath>

namespace mii {

Eigen::MatrixXd VectorField::jacobian(const Eigen::VectorXd& y) const {
  if (df) return df(y);
  const auto n = y.size();
  Eigen::MatrixXd Jm(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double step = 1e-6 * std::max(1.0, std::abs(y(j)));
    Eigen::VectorXd yp = y, ym = y;
    yp(j) += step;
    ym(j) -= step;
    Jm.col(j) = (f(yp) - f(ym)) / (2 * step);
  }
  return Jm;
}

VectorField hamiltonian_field(const HamiltonianSystem& sys) {
  VectorField v;
  v.dim = sys.dim();
  v.f = [sys](const Eigen::VectorXd& y) { return sys.field(y); };
  v.df = [sys](const Eigen::VectorXd& y) { return sys.jacobian(y); };
  return v;
}

VectorField linear_field(const Eigen::MatrixXd& A) {
  VectorField v;
  v.dim = static_cast<int>(A.rows());
  v.f = [A](const Eigen::VectorXd& y) -> Eigen::VectorXd { return A * y; };
  v.df = [A](const Eigen::VectorXd&) { return A; };
  return v;
}

VectorField zero_field(int dim) {
  VectorField v;
  v.dim = dim;
  v.f = [dim](const Eigen::VectorXd&) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(dim); };
  v.df = [dim](const Eigen::VectorXd&) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(dim, dim); };
  return v;
}

VectorField counting_field(VectorField inner, EvalCounter counter) {
  VectorField v;
  v.dim = inner.dim;
  v.df = inner.df;
  v.f = [f = inner.f, c = counter.count](const Eigen::VectorXd& y) {
    c->fetch_add(1);
    return f(y);
  };
  return v;
}

VectorField recording_field(VectorField inner, EvalRecorder recorder) {
  VectorField v;
  v.dim = inner.dim;
  v.df = inner.df;
  v.f = [f = inner.f, recorder](const Eigen::VectorXd& y) {
    {
      std::lock_guard<std::mutex> g(*recorder.lock);
      recorder.points->push_back(y);
    }
    return f(y);
  };
  return v;
}

}  // namespace mii
