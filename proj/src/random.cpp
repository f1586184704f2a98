#include "mii/random.hpp"

namespace mii {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t s = root;
  std::uint64_t a = splitmix64(s) ^ (stream * 0xD1B54A32D192ED03ULL);
  const std::uint64_t child = splitmix64(a);
  std::uint64_t b = child ^ (index * 0xABC98388FB8FAC03ULL);
  return splitmix64(b);
}

std::uint64_t derive_seed(std::uint64_t root, Stream stream, std::uint64_t index) {
  return derive_seed(root, static_cast<std::uint64_t>(stream), index);
}

Eigen::VectorXd Rng::normal_vector(Eigen::Index n, double stddev) {
  Eigen::VectorXd v(n);
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(engine_);
  return v;
}

Eigen::VectorXd Rng::uniform_vector(Eigen::Index n, double lo, double hi) {
  Eigen::VectorXd v(n);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(engine_);
  return v;
}

}  // namespace mii
