#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace mii {

/// Stream indices for seed splitting; every random choice derives from one root.
enum class Stream : std::uint64_t {
  data_initial_values = 1,
  noise = 2,
  model_init = 3,
  test_points = 4,
  monte_carlo = 5,
};

/// One SplitMix64 step (advances `state`).
std::uint64_t splitmix64(std::uint64_t& state);

/// seed = splitmix(splitmix(root ^ stream-mix) ^ index-mix); distinct (stream, index)
/// pairs give decorrelated child seeds.
std::uint64_t derive_seed(std::uint64_t root, Stream stream, std::uint64_t index = 0);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  Eigen::VectorXd normal_vector(Eigen::Index n, double stddev = 1.0);
  Eigen::VectorXd uniform_vector(Eigen::Index n, double lo, double hi);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mii
