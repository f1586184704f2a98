#pragma once

#include "mii/systems.hpp"
#include "mii/tableau.hpp"
#include "mii/vector_field.hpp"

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mii {

/// Equidistant samples; row n of `points` is the state at t0 + n h.
struct Trajectory {
  double t0 = 0;
  double h = 0;
  Eigen::MatrixXd points;  // (N+1) x 2d
  bool exact = true;

  int steps() const { return static_cast<int>(points.rows()) - 1; }
  int dim() const { return static_cast<int>(points.cols()); }
  Eigen::VectorXd point(int n) const { return points.row(n).transpose(); }
};

enum class SolverKind { newton, fixed_point };

struct IvpSolveSettings {
  SolverKind kind = SolverKind::newton;
  double tolerance = 1e-12;
  int max_iterations = 50;
};

/// Thrown when an implicit solve does not converge.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// One Runge--Kutta step. Implicit stages are solved by Newton on the stage
/// derivatives (falling back to fixed-point iteration).
Eigen::VectorXd rk_step(const Tableau& t, const VectorField& f, const Eigen::VectorXd& y, double h,
                        const IvpSolveSettings& settings = {});

/// Psi = sum_i b_i k_i with k_i = f(y_n + v_i (y_np1 - y_n) + h sum_j d_ij k_j).
Eigen::VectorXd mirk_increment(const MirkTableau& m, const VectorField& f,
                               const Eigen::VectorXd& y_n, const Eigen::VectorXd& y_np1, double h);

/// y_n + h Psi(y_n, y_np1).
Eigen::VectorXd inverse_explicit_step(const MirkTableau& m, const VectorField& f,
                                      const Eigen::VectorXd& y_n, const Eigen::VectorXd& y_np1,
                                      double h);

/// Stage i evaluates f at a sample point (D row zero, v_i in {0, 1}).
/// Returns -1 if not an endpoint stage, 0 for y_n, 1 for y_{n+1}.
int endpoint_stage_kind(const MirkTableau& m, int stage);

/// Increments Psi_{n,n+1} for n = 0..N-1 as rows of an N x 2d matrix. With
/// `share_endpoint_stages`, f is evaluated once per sample point and reused by
/// every endpoint stage of the adjacent steps.
Eigen::MatrixXd mirk_trajectory_increments(const MirkTableau& m, const VectorField& f,
                                           const Eigen::MatrixXd& points, double h,
                                           bool share_endpoint_stages = true);

/// Kick-drift-kick. The field must come from a separable Hamiltonian.
Eigen::VectorXd stormer_verlet_step(const VectorField& f, const Eigen::VectorXd& y, double h);
/// Throws std::invalid_argument for a non-separable system.
Eigen::VectorXd stormer_verlet_step(const HamiltonianSystem& sys, const Eigen::VectorXd& y, double h);

/// Fourth-order modified implicit midpoint method.
Eigen::VectorXd edrk4_step(const HamiltonianSystem& sys, const Eigen::VectorXd& y, double h,
                           const IvpSolveSettings& settings = {});

/// Gonzalez (midpoint) discrete gradient.
Eigen::VectorXd discrete_gradient(const HamiltonianSystem& sys, const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& v);
/// Q(u, v) = (D2 dg(u,v)^T - D2 dg(u,v)) / 2.
Eigen::MatrixXd discrete_gradient_q(const HamiltonianSystem& sys, const Eigen::VectorXd& u,
                                    const Eigen::VectorXd& v);

/// Discrete gradient method with constant skew S; order 2 uses S_bar = S, order 4
/// the symmetric fourth-order S_bar.
Eigen::VectorXd dg_step(const HamiltonianSystem& sys, const Eigen::MatrixXd& S,
                        const Eigen::VectorXd& y, double h, int order,
                        const IvpSolveSettings& settings = {});

struct ReferenceSettings {
  double max_internal_step = 0.01;
  IvpSolveSettings newton{SolverKind::newton, 1e-13, 50};
};

/// GL6 with internal step h_out / ceil(h_out / max_internal_step), sampled every h_out.
Trajectory reference_solve(const VectorField& f, const Eigen::VectorXd& y0, double h_out, int N,
                           const ReferenceSettings& settings = {});
Trajectory reference_solve(const HamiltonianSystem& sys, const Eigen::VectorXd& y0, double h_out,
                           int N, const ReferenceSettings& settings = {});

using Stepper = std::function<Eigen::VectorXd(const Eigen::VectorXd& y, double h)>;

/// Steppers by name: any catalog tableau key, "stormer_verlet", "edrk4", "dg2", "dg4".
Stepper make_stepper(const std::string& name, const HamiltonianSystem& sys,
                     const IvpSolveSettings& settings = {});
std::vector<std::string> stepper_names();

/// Runs `steps` steps of `stepper` from y0.
Trajectory integrate(const Stepper& stepper, const Eigen::VectorXd& y0, double h, int steps);

struct OrderFit {
  double order = 0;  // slope - 1
  std::vector<double> h;
  std::vector<double> errors;
  int used_points = 0;
};

/// Least-squares slope of log one-step error vs log h, against reference_solve.
/// Errors below `floor` are dropped; fewer than 3 usable points throws.
OrderFit empirical_order(const Stepper& stepper, const HamiltonianSystem& sys,
                         const Eigen::VectorXd& y0, const std::vector<double>& h_list,
                         double floor = 1e-13);

/// Slope fit of log(values) against log(h); helper shared by tests.
double loglog_slope(const std::vector<double>& h, const std::vector<double>& values);

}  // namespace mii
