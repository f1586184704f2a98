#pragma once

#include "mii/differentiable_field.hpp"
#include "mii/vector_field.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace mii {

enum class ModelVariant { dense, separable, quadratic };

std::string to_string(ModelVariant v);
ModelVariant model_variant_from_string(const std::string& s);

struct ModelArchitecture {
  ModelVariant variant = ModelVariant::dense;
  int state_dim = 4;             // 2d
  std::vector<int> hidden{32, 32};  // ignored by the quadratic variant
};

/// Scalar tanh network x -> H(x) acting on the columns of a matrix. Parameters
/// live in an external flat vector: per layer W (column-major) followed by b.
class Mlp {
 public:
  Mlp() = default;
  /// widths = [input, hidden..., 1]
  explicit Mlp(std::vector<int> widths);

  int num_parameters() const { return num_parameters_; }
  int input_dim() const { return widths_.front(); }
  const std::vector<int>& widths() const { return widths_; }

  Eigen::RowVectorXd value(const double* theta, const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd gradient(const double* theta, const Eigen::MatrixXd& X) const;
  /// Reverse pass for the scalar sum_k (U_bar_k . grad H(x_k) + c_k H(x_k)).
  /// Adds into theta_bar (may be null) and returns X_bar.
  Eigen::MatrixXd backward(const double* theta, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U_bar,
                           const Eigen::RowVectorXd& c, double* theta_bar) const;

  void initialize(double* theta, std::uint64_t seed) const;

 private:
  struct Layer {
    int in = 0, out = 0;
    int w_offset = 0, b_offset = 0;
  };
  std::vector<int> widths_;
  std::vector<Layer> layers_;
  int num_parameters_ = 0;

  void forward_cache(const double* theta, const Eigen::MatrixXd& X, std::vector<Eigen::MatrixXd>& A) const;
};

/// Parametric Hamiltonian H_theta with f_theta = J grad H_theta.
class ScalarFieldModel final : public DifferentiableField {
 public:
  ScalarFieldModel() = default;
  ScalarFieldModel(ModelArchitecture arch, std::uint64_t seed);

  const ModelArchitecture& architecture() const { return arch_; }
  std::uint64_t seed() const { return seed_; }

  int dim() const override { return arch_.state_dim; }
  int num_parameters() const override { return static_cast<int>(theta_.size()); }
  const Eigen::VectorXd& parameters() const { return theta_; }
  void set_parameters(const Eigen::VectorXd& theta);

  double forward(const Eigen::VectorXd& y) const;
  Eigen::RowVectorXd forward_batch(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd input_gradient(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd input_gradient_batch(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd vector_field(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd input_hessian(const Eigen::VectorXd& y) const;

  Eigen::MatrixXd field(const Eigen::MatrixXd& X) const override;
  Eigen::MatrixXd field_vjp(const Eigen::MatrixXd& X, const Eigen::MatrixXd& F_bar,
                            Eigen::VectorXd* theta_bar) const override;

  /// General reverse pass: cotangent U_bar on grad H and c on H.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U_bar, const Eigen::RowVectorXd& c,
                           Eigen::VectorXd* theta_bar) const;

  /// Copy usable by the integrators (analytic Jacobian J Hess).
  VectorField as_vector_field() const;

  /// One JSON header line, a newline, then little-endian float64 parameters.
  void save(const std::string& path, const std::string& metadata_json = "{}") const;
  /// Returns the model; the "metadata" object of the header is written to *metadata_json.
  static ScalarFieldModel load(const std::string& path, std::string* metadata_json = nullptr);

 private:
  ModelArchitecture arch_;
  std::uint64_t seed_ = 0;
  Eigen::VectorXd theta_;
  Mlp dense_, q_net_, p_net_;

  void build();
  Eigen::MatrixXd quadratic_S() const;
};

}  // namespace mii
