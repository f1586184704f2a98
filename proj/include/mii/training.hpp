#pragma once

#include "mii/differentiable_field.hpp"
#include "mii/integrators.hpp"
#include "mii/lbfgs.hpp"
#include "mii/model.hpp"
#include "mii/tableau.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace mii {

/// Noisy trajectories plus the noise-free samples they were drawn around.
struct DataSet {
  std::string system;
  double h = 0;
  int N1 = 0;
  double sigma = 0;
  std::uint64_t seed = 0;
  std::vector<Trajectory> noisy;
  std::vector<Trajectory> clean;

  int dim() const { return noisy.empty() ? 0 : noisy.front().dim(); }
  int trajectories() const { return static_cast<int>(noisy.size()); }
};

enum class MethodKind { one_step, mii, iso };

/// Training method: the loss family plus its integrator. The integrator is a
/// catalog tableau key, or "stormer_verlet" for one-step/ISO.
struct MethodSpec {
  MethodKind kind = MethodKind::one_step;
  std::string integrator = "mirk4";

  /// Benchmark label: "MIRK4-OS", "MII-MIRK4", "ISO-RK4", "ISO-Stormer", ...
  std::string label() const;
  /// "onestep:<key>", "mii:<key>", "iso:<key>".
  std::string id() const;
};

/// Accepts "onestep:mirk4", "mii:mirk4", "iso:rk4", "iso:stormer_verlet" and the
/// benchmark labels ("MIRK4-OS", "MII-MIRK4", "ISO-RK4", "ISO-Stormer", ...).
MethodSpec parse_method(const std::string& text);

struct LossResult {
  double value = 0;
  Eigen::VectorXd gradient;  // w.r.t. the field parameters (empty if not requested)
  long field_evaluations = 0;  // columns pushed through the field
};

/// sum ||y_{n+1} - y_n - h Psi(y_n, y_{n+1})||^2 over all steps; `integrator` is a
/// tableau key or "stormer_verlet" (explicit step from y_n).
LossResult one_step_loss(const DifferentiableField& field, const DataSet& data, const std::string& integrator,
                         bool want_gradient = true, bool share_endpoint_stages = true);
LossResult one_step_loss(const DifferentiableField& field, const DataSet& data, const MirkTableau& m,
                         bool want_gradient = true, bool share_endpoint_stages = true);

/// sum over trajectories of ||Y - (U Y + h W Psi)/N||_F^2.
LossResult mii_loss(const DifferentiableField& field, const DataSet& data, const MirkTableau& m,
                    bool want_gradient = true);

/// sum_{n>=1} ||y_n - Phi^n(y0_hat)||^2 with an explicit stepper ("rk4",
/// another explicit tableau key, or "stormer_verlet"). y0_hat is 2d x trajectories.
/// `y0_gradient` (optional) receives d loss / d y0_hat.
LossResult iso_rollout_loss(const DifferentiableField& field, const DataSet& data, const std::string& stepper,
                            const Eigen::MatrixXd& y0_hat, bool want_gradient = true,
                            Eigen::MatrixXd* y0_gradient = nullptr);

struct InitialStateSettings {
  double grad_tolerance = 1e-6;
  int max_iterations = 10;
};

/// Per-trajectory quasi-Newton on y0_hat with the field held fixed.
Eigen::MatrixXd optimize_initial_states(const DifferentiableField& field, const DataSet& data,
                                        const std::string& stepper, const Eigen::MatrixXd& y0_hat,
                                        const InitialStateSettings& settings = {});

struct TrainConfig {
  MethodSpec method;
  int epochs = 4;           // total, pretraining included
  int pretrain_epochs = 2;  // one-step epochs before the method phase
  std::string optimizer = "lbfgs";  // or "adam"
  LbfgsSettings lbfgs;
  AdamSettings adam;
  InitialStateSettings iso;
  ModelArchitecture architecture;
  std::uint64_t seed = 0;  // root seed; model init uses the model_init stream
};

struct EpochRecord {
  int epoch = 0;
  std::string phase;  // "pretrain" or "method"
  std::string loss_kind;
  double loss_before = 0;
  double loss = 0;
  double wall_seconds = 0;
  int iterations = 0;
  std::string stop_reason;
};

struct TrainResult {
  ScalarFieldModel model;
  std::vector<EpochRecord> history;
  double train_seconds = 0;
};

/// Throws std::invalid_argument for bad configs (e.g. Stormer-Verlet on a
/// non-separable model) and std::runtime_error for non-finite losses.
TrainResult train(const TrainConfig& config, const DataSet& data);
/// Same, continuing from an existing model.
TrainResult train(const TrainConfig& config, const DataSet& data, ScalarFieldModel initial);

struct FlowErrorReport {
  double e = 0;
  int M = 0;
  std::vector<double> errors;
};

/// Reference-solves the learned field over one step h from each test point and
/// compares against the true flow.
FlowErrorReport flow_error(const VectorField& learned, const HamiltonianSystem& sys,
                           const std::vector<Eigen::VectorXd>& test_points, double h);

}  // namespace mii
