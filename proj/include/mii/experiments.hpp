#pragma once

#include "mii/integrators.hpp"
#include "mii/model.hpp"
#include "mii/training.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace mii {

/// Uniform samples from the shell r_min <= ||y|| <= r_max in R^dim by rejection
/// from the cube around the ball of radius r_max. Throws after 1e6 attempts.
std::vector<Eigen::VectorXd> sample_shell(int count, int dim, double r_min, double r_max, std::uint64_t seed);

struct DataSpec {
  std::string system = "henon_heiles";
  int N2 = 30;
  double r_min = 0.3;
  double r_max = 0.6;
  double h = 0.1;
  int N1 = 16;
  double sigma = 0.05;
  std::uint64_t seed = 0;  // root seed (initial values and noise streams)
};

/// Reference trajectories from shell initial values plus N(0, sigma^2 I) noise.
DataSet generate_dataset(const DataSpec& spec);

void save_dataset(const DataSet& data, const std::string& path);
DataSet load_dataset(const std::string& path);

/// Separable model for separable systems, dense otherwise.
ModelArchitecture default_architecture(const HamiltonianSystem& sys, std::vector<int> hidden = {32, 32});

struct GridConfig {
  std::vector<std::string> systems{"henon_heiles", "double_pendulum"};
  std::vector<std::string> methods{"Midpoint-OS", "RK4-OS", "MIRK4-OS", "MII-MIRK4"};
  std::vector<std::pair<double, int>> steps{{0.4, 4}, {0.2, 8}, {0.1, 16}};
  std::vector<double> sigmas{0.05};
  int repeats = 5;
};

/// Parsed JSON config with sections {data, model, train, grid}.
struct ExperimentConfig {
  DataSpec data;
  std::string model_variant = "auto";  // auto | dense | separable | quadratic
  std::vector<int> hidden{32, 32};
  TrainConfig train;
  GridConfig grid;
  int test_points = 10;
  std::uint64_t seed = 0;
};

ExperimentConfig config_from_json(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
/// Architecture for `system` honouring model_variant.
ModelArchitecture resolve_architecture(const ExperimentConfig& cfg, const HamiltonianSystem& sys);

struct BenchmarkRow {
  std::string system;
  std::string method;
  double h = 0;
  int N1 = 0;
  double sigma = 0;
  std::uint64_t seed = 0;
  double flow_error = 0;
  double train_seconds = 0;
  std::string status = "ok";
};

std::string benchmark_csv_header();
std::string to_csv(const BenchmarkRow& row);

/// Root seed of repeat r.
std::uint64_t repeat_seed(std::uint64_t root, int repeat);

/// Trains and evaluates one cell. Failures are returned as rows with status != "ok".
BenchmarkRow run_cell(const ExperimentConfig& cfg, const std::string& system, const std::string& method, double h,
                      int N1, double sigma, int repeat);

/// Every (system, method, (h, N1), sigma, repeat) cell; rows are appended to
/// `csv_path` (if non-empty) one line at a time as cells finish.
std::vector<BenchmarkRow> run_benchmark(const ExperimentConfig& cfg, const std::string& csv_path = "",
                                        const std::function<void(const BenchmarkRow&)>& progress = {});

/// Python script that plots a benchmark CSV (flow error vs h per method).
std::string benchmark_plot_script(const std::string& csv_path);

/// Reference roll-out of a field from y0.
Trajectory rollout(const VectorField& f, const Eigen::VectorXd& y0, double h, int steps);

}  // namespace mii
