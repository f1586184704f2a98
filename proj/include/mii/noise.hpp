#pragma once

#include "mii/integrators.hpp"
#include "mii/systems.hpp"
#include "mii/tableau.hpp"
#include "mii/vector_field.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace mii {

enum class SensitivityMode { os, mii };

std::string to_string(SensitivityMode m);

/// sigma2 ||2I + h alpha (f' + f'^T) + h^2 Q_OS||_2 with
/// Q_OS = ((b^T v)^2 + (b^T(1 - v))^2) f' f'^T.
double analytic_rho_os(const MirkTableau& m, const Eigen::MatrixXd& fprime, double h, double sigma2);

/// (sigma2/N) ||(1+N)I - h P_nn + (h/N) sum_{j != n} P_nj + (h^2/N) Q_MII||_2 for
/// point n in 0..N; jacobians[j] = f'(y_j), W is the (N+1) x N MII matrix.
double analytic_rho_mii(const MirkTableau& m, const std::vector<Eigen::MatrixXd>& jacobians,
                        const Eigen::MatrixXd& W, int n, double h, double sigma2);

struct MonteCarloResult {
  std::vector<int> indices;  // trajectory points n covered
  std::vector<double> rho;   // rho_hat_n, same order as indices
  double mean = 0;           // trajectory average
  double min_covariance_eigenvalue = 0;
};

/// Perturbs every point of `exact` with N(0, sigma2 I) noise, evaluates the
/// optimisation target with the true field and returns the spectral radius of
/// its empirical covariance at every point. OS covers n = 1..N, MII n = 0..N.
MonteCarloResult monte_carlo_rho(const VectorField& f, const Trajectory& exact, const MirkTableau& m,
                                 SensitivityMode mode, double sigma2, int n_samples, std::uint64_t seed);

/// Analytic counterparts along an exact trajectory (same index set as monte_carlo_rho).
std::vector<double> analytic_rho_trajectory(const HamiltonianSystem& sys, const Trajectory& exact,
                                            const MirkTableau& m, SensitivityMode mode, double sigma2);

/// Empirical variance of the mean of N i.i.d. N(0, sigma2) samples over `draws` repetitions.
double sample_mean_variance_demo(double sigma2, int N, int draws, std::uint64_t seed);

struct SensitivityConfig {
  std::string system = "double_pendulum";
  double T = 2.4;
  double sigma2 = 2.5e-3;
  int samples = 5000;
  std::vector<double> h_list{0.3, 0.15, 0.075};
  int trajectories = 10;
  double r_min = 0.3;
  double r_max = 0.6;
  std::uint64_t seed = 0;
};

struct SensitivityRow {
  double h = 0;
  int N = 0;
  std::string mode;    // "OS" or "MII"
  std::string method;  // tableau display name
  double rho_mc_mean = 0;
  double rho_mc_std = 0;
  double rho_analytic = 0;
  std::vector<double> rho_mc_per_trajectory;
  std::vector<double> rho_analytic_per_trajectory;
};

/// OS-RK4, OS-MIRK4 and MII-MIRK4 at every h; trajectories start in the shell
/// r_min <= ||y0|| <= r_max and N = round(T / h).
std::vector<SensitivityRow> run_sensitivity(const SensitivityConfig& config);

}  // namespace mii
