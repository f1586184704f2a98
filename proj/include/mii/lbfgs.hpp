#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace mii {

/// Returns f(x) and writes grad f(x) into `grad` (already sized).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsSettings {
  int history = 120;
  int max_iterations = 50;
  int max_evaluations = 0;  // 0 -> 1.25 * max_iterations
  double grad_tolerance = 1e-9;
  double change_tolerance = 1e-9;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 25;
};

struct AdamSettings {
  double learning_rate = 1e-3;
  int iterations = 2000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0;
  double f_initial = 0;
  int iterations = 0;
  int evaluations = 0;
  std::string stop_reason;
};

/// Limited-memory BFGS with a strong-Wolfe line search (cubic interpolation).
/// Returns the best iterate seen.
OptimResult lbfgs_minimize(const Objective& fn, Eigen::VectorXd x0, const LbfgsSettings& settings = {});

/// First-order fallback.
OptimResult adam_minimize(const Objective& fn, Eigen::VectorXd x0, const AdamSettings& settings = {});

}  // namespace mii
