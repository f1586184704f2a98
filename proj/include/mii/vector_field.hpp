#pragma once

#include "mii/systems.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

namespace mii {

/// Autonomous vector field y' = f(y) with optional analytic Jacobian.
struct VectorField {
  int dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> df;  // may be empty

  Eigen::VectorXd operator()(const Eigen::VectorXd& y) const { return f(y); }
  /// Analytic Jacobian if present, else central differences.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& y) const;
};

VectorField hamiltonian_field(const HamiltonianSystem& sys);
VectorField linear_field(const Eigen::MatrixXd& A);
VectorField zero_field(int dim);

/// Thread-safe evaluation counter shared between copies of a wrapped field.
struct EvalCounter {
  std::shared_ptr<std::atomic<long>> count = std::make_shared<std::atomic<long>>(0);
  long value() const { return count->load(); }
  void reset() { count->store(0); }
};

/// Wraps `inner` so every call of f increments `counter`.
VectorField counting_field(VectorField inner, EvalCounter counter);

/// Records every point at which f is evaluated.
struct EvalRecorder {
  std::shared_ptr<std::vector<Eigen::VectorXd>> points =
      std::make_shared<std::vector<Eigen::VectorXd>>();
  std::shared_ptr<std::mutex> lock = std::make_shared<std::mutex>();
};
VectorField recording_field(VectorField inner, EvalRecorder recorder);

}  // namespace mii
