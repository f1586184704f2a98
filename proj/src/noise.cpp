#include "mii/noise.hpp"

#include "mii/experiments.hpp"
#include "mii/linalg.hpp"
#include "mii/mii_operator.hpp"
#include "mii/parallel.hpp"
#include "mii/random.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace mii {

std::string to_string(SensitivityMode m) { return m == SensitivityMode::os ? "OS" : "MII"; }

double analytic_rho_os(const MirkTableau& m, const Eigen::MatrixXd& fprime, double h, double sigma2) {
  if (fprime.rows() != fprime.cols()) throw std::invalid_argument("analytic_rho_os: f' must be square");
  const auto n = fprime.rows();
  const double btv = m.b.dot(m.v);
  const double bt1v = m.b.sum() - btv;
  const Eigen::MatrixXd Q = (btv * btv + bt1v * bt1v) * fprime * fprime.transpose();
  const Eigen::MatrixXd M = 2.0 * Eigen::MatrixXd::Identity(n, n) + h * alpha(m) * (fprime + fprime.transpose()) +
                            h * h * Q;
  return sigma2 * spectral_norm(M);
}

double analytic_rho_mii(const MirkTableau& m, const std::vector<Eigen::MatrixXd>& jacobians,
                        const Eigen::MatrixXd& W, int n, double h, double sigma2) {
  const int N = static_cast<int>(W.cols());
  if (static_cast<int>(jacobians.size()) != N + 1 || W.rows() != N + 1)
    throw std::invalid_argument("analytic_rho_mii: need N+1 Jacobians and an (N+1) x N matrix W");
  if (n < 0 || n > N) throw std::out_of_range("analytic_rho_mii: index n out of range");
  const auto dim = jacobians.front().rows();
  const double btv = m.b.dot(m.v);
  const double bt1v = m.b.sum() - btv;
  // Padded weights: w~_{n,j} is the weight of Psi_{j,j+1}, zero outside 0..N-1.
  auto wt = [&](int j) { return j >= 0 && j < N ? W(n, j) : 0.0; };

  Eigen::MatrixXd M = (1.0 + N) * Eigen::MatrixXd::Identity(dim, dim);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(dim, dim);
  for (int j = 0; j <= N; ++j) {
    const Eigen::MatrixXd Pbar = jacobians[static_cast<std::size_t>(j)] * (wt(j) * bt1v + wt(j - 1) * btv);
    const Eigen::MatrixXd P = Pbar + Pbar.transpose();
    if (j == n)
      M -= h * P;
    else
      M += (h / N) * P;
    Q += Pbar * Pbar.transpose();
  }
  M += (h * h / N) * Q;
  return sigma2 / N * spectral_norm(M);
}

MonteCarloResult monte_carlo_rho(const VectorField& f, const Trajectory& exact, const MirkTableau& m,
                                 SensitivityMode mode, double sigma2, int n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw std::invalid_argument("monte_carlo_rho: need at least two samples");
  const int N = exact.steps();
  const int dim = exact.dim();
  const int first = mode == SensitivityMode::os ? 1 : 0;
  const int count = N + 1 - first;
  const double sigma = std::sqrt(sigma2);
  const MiiOperator op = build_uw(N);

  // targets[k] holds the samples of T_{first+k} as columns.
  std::vector<Eigen::MatrixXd> targets(static_cast<std::size_t>(count), Eigen::MatrixXd(dim, n_samples));
  constexpr int chunk = 250;
  const int chunks = (n_samples + chunk - 1) / chunk;
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
    Rng rng(derive_seed(seed, Stream::monte_carlo, c));
    const int lo = static_cast<int>(c) * chunk, hi = std::min(n_samples, lo + chunk);
    for (int s = lo; s < hi; ++s) {
      Eigen::MatrixXd Y = exact.points;
      for (Eigen::Index r = 0; r < Y.rows(); ++r)
        for (Eigen::Index k = 0; k < Y.cols(); ++k) Y(r, k) += rng.normal(0.0, sigma);
      const Eigen::MatrixXd psi = mirk_trajectory_increments(m, f, Y, exact.h, true);
      if (mode == SensitivityMode::os) {
        for (int n = 1; n <= N; ++n)
          targets[static_cast<std::size_t>(n - 1)].col(s) =
              (Y.row(n) - Y.row(n - 1) - exact.h * psi.row(n - 1)).transpose();
      } else {
        const Eigen::MatrixXd Ybar = mii_combine(op, Y, psi, exact.h);
        for (int n = 0; n <= N; ++n) targets[static_cast<std::size_t>(n)].col(s) = (Y.row(n) - Ybar.row(n)).transpose();
      }
    }
  });

  MonteCarloResult r;
  r.min_covariance_eigenvalue = std::numeric_limits<double>::infinity();
  double sum = 0;
  for (int k = 0; k < count; ++k) {
    const Eigen::MatrixXd cov = sample_covariance(targets[static_cast<std::size_t>(k)]);
    const double rho = spectral_norm(cov);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    r.min_covariance_eigenvalue = std::min(r.min_covariance_eigenvalue, es.eigenvalues().minCoeff());
    r.indices.push_back(first + k);
    r.rho.push_back(rho);
    sum += rho;
  }
  r.mean = sum / count;
  return r;
}

std::vector<double> analytic_rho_trajectory(const HamiltonianSystem& sys, const Trajectory& exact,
                                            const MirkTableau& m, SensitivityMode mode, double sigma2) {
  const int N = exact.steps();
  std::vector<Eigen::MatrixXd> jac;
  for (int n = 0; n <= N; ++n) jac.push_back(sys.jacobian(exact.point(n)));
  std::vector<double> out;
  if (mode == SensitivityMode::os) {
    for (int n = 1; n <= N; ++n) out.push_back(analytic_rho_os(m, jac[static_cast<std::size_t>(n)], exact.h, sigma2));
  } else {
    const MiiOperator op = build_uw(N);
    for (int n = 0; n <= N; ++n) out.push_back(analytic_rho_mii(m, jac, op.W, n, exact.h, sigma2));
  }
  return out;
}

double sample_mean_variance_demo(double sigma2, int N, int draws, std::uint64_t seed) {
  if (N < 1 || draws < 2) throw std::invalid_argument("sample_mean_variance_demo: need N >= 1 and draws >= 2");
  Rng rng(seed);
  const double sigma = std::sqrt(sigma2);
  Eigen::MatrixXd means(1, draws);
  for (int k = 0; k < draws; ++k) {
    double s = 0;
    for (int i = 0; i < N; ++i) s += rng.normal(0.0, sigma);
    means(0, k) = s / N;
  }
  return sample_covariance(means)(0, 0);
}

std::vector<SensitivityRow> run_sensitivity(const SensitivityConfig& cfg) {
  const HamiltonianSystem sys = system_by_name(cfg.system);
  const VectorField f = hamiltonian_field(sys);
  const auto y0s = sample_shell(cfg.trajectories, sys.dim(), cfg.r_min, cfg.r_max,
                                derive_seed(cfg.seed, Stream::data_initial_values));
  struct Cell {
    SensitivityMode mode;
    const char* key;
  };
  const Cell cells[] = {{SensitivityMode::os, "rk4"}, {SensitivityMode::os, "mirk4"}, {SensitivityMode::mii, "mirk4"}};

  std::vector<SensitivityRow> rows;
  for (double h : cfg.h_list) {
    const int N = static_cast<int>(std::lround(cfg.T / h));
    std::vector<Trajectory> trs;
    for (const auto& y0 : y0s) trs.push_back(reference_solve(sys, y0, h, N));
    for (const auto& cell : cells) {
      const auto& entry = find_tableau(cell.key);
      SensitivityRow row;
      row.h = h;
      row.N = N;
      row.mode = to_string(cell.mode);
      row.method = entry.display_name;
      for (std::size_t t = 0; t < trs.size(); ++t) {
        const auto mc = monte_carlo_rho(f, trs[t], *entry.mirk, cell.mode, cfg.sigma2, cfg.samples,
                                        derive_seed(cfg.seed, Stream::monte_carlo, t));
        const auto an = analytic_rho_trajectory(sys, trs[t], *entry.mirk, cell.mode, cfg.sigma2);
        double am = 0;
        for (double v : an) am += v;
        row.rho_mc_per_trajectory.push_back(mc.mean);
        row.rho_analytic_per_trajectory.push_back(am / static_cast<double>(an.size()));
      }
      const auto T = static_cast<double>(trs.size());
      double mean = 0, amean = 0;
      for (std::size_t t = 0; t < trs.size(); ++t) {
        mean += row.rho_mc_per_trajectory[t];
        amean += row.rho_analytic_per_trajectory[t];
      }
      mean /= T;
      amean /= T;
      double var = 0;
      for (double v : row.rho_mc_per_trajectory) var += (v - mean) * (v - mean);
      row.rho_mc_mean = mean;
      row.rho_mc_std = trs.size() > 1 ? std::sqrt(var / (T - 1)) : 0.0;
      row.rho_analytic = amean;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace mii
