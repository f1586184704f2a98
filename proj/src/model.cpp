#include "mii/model.hpp"

#include "mii/random.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace mii {

std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::dense: return "dense";
    case ModelVariant::separable: return "separable";
    case ModelVariant::quadratic: return "quadratic";
  }
  return "dense";
}

ModelVariant model_variant_from_string(const std::string& s) {
  if (s == "dense") return ModelVariant::dense;
  if (s == "separable") return ModelVariant::separable;
  if (s == "quadratic") return ModelVariant::quadratic;
  throw std::invalid_argument("unknown model variant '" + s + "'");
}

// ---------------------------------------------------------------- Mlp

Mlp::Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2 || widths_.back() != 1)
    throw std::invalid_argument("Mlp: widths must be [input, hidden..., 1]");
  int off = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    Layer L;
    L.in = widths_[l];
    L.out = widths_[l + 1];
    if (L.in < 1 || L.out < 1) throw std::invalid_argument("Mlp: widths must be positive");
    L.w_offset = off;
    off += L.in * L.out;
    L.b_offset = off;
    off += L.out;
    layers_.push_back(L);
  }
  num_parameters_ = off;
}

void Mlp::initialize(double* theta, std::uint64_t seed) const {
  Rng rng(seed);
  for (const auto& L : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(L.in));
    for (int k = 0; k < L.in * L.out; ++k) theta[L.w_offset + k] = rng.uniform(-bound, bound);
    for (int k = 0; k < L.out; ++k) theta[L.b_offset + k] = rng.uniform(-bound, bound);
  }
}

void Mlp::forward_cache(const double* theta, const Eigen::MatrixXd& X, std::vector<Eigen::MatrixXd>& A) const {
  A.resize(layers_.size());
  A[0] = X;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    const auto& L = layers_[l];
    Eigen::Map<const Eigen::MatrixXd> W(theta + L.w_offset, L.out, L.in);
    Eigen::Map<const Eigen::VectorXd> b(theta + L.b_offset, L.out);
    A[l + 1] = ((W * A[l]).colwise() + b).array().tanh().matrix();
  }
}

Eigen::RowVectorXd Mlp::value(const double* theta, const Eigen::MatrixXd& X) const {
  std::vector<Eigen::MatrixXd> A;
  forward_cache(theta, X, A);
  const auto& L = layers_.back();
  Eigen::Map<const Eigen::RowVectorXd> w(theta + L.w_offset, L.in);
  return (w * A.back()).array() + theta[L.b_offset];
}

Eigen::MatrixXd Mlp::gradient(const double* theta, const Eigen::MatrixXd& X) const {
  std::vector<Eigen::MatrixXd> A;
  forward_cache(theta, X, A);
  const auto& last = layers_.back();
  Eigen::Map<const Eigen::VectorXd> w(theta + last.w_offset, last.in);
  Eigen::MatrixXd G = w.replicate(1, X.cols());
  for (std::size_t k = layers_.size() - 1; k >= 1; --k) {
    const auto& L = layers_[k - 1];
    Eigen::Map<const Eigen::MatrixXd> W(theta + L.w_offset, L.out, L.in);
    const Eigen::MatrixXd delta = G.cwiseProduct((1.0 - A[k].array().square()).matrix());
    G = W.transpose() * delta;
  }
  return G;
}

Eigen::MatrixXd Mlp::backward(const double* theta, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U_bar,
                              const Eigen::RowVectorXd& c, double* theta_bar) const {
  const std::size_t nl = layers_.size();
  std::vector<Eigen::MatrixXd> A;
  forward_cache(theta, X, A);

  // Gradient pass: G[k] = dH/dA[k], D[k] = G[k] * (1 - A[k]^2).
  std::vector<Eigen::MatrixXd> G(nl), D(nl);
  const auto& last = layers_.back();
  Eigen::Map<const Eigen::VectorXd> w(theta + last.w_offset, last.in);
  G[nl - 1] = w.replicate(1, X.cols());
  for (std::size_t k = nl - 1; k >= 1; --k) {
    const auto& L = layers_[k - 1];
    Eigen::Map<const Eigen::MatrixXd> W(theta + L.w_offset, L.out, L.in);
    D[k] = G[k].cwiseProduct((1.0 - A[k].array().square()).matrix());
    G[k - 1] = W.transpose() * D[k];
  }

  std::vector<Eigen::MatrixXd> A_bar(nl);
  for (std::size_t k = 0; k < nl; ++k) A_bar[k] = Eigen::MatrixXd::Zero(A[k].rows(), A[k].cols());
  auto W_bar = [&](const Layer& L) { return Eigen::Map<Eigen::MatrixXd>(theta_bar + L.w_offset, L.out, L.in); };
  auto b_bar = [&](const Layer& L) { return Eigen::Map<Eigen::VectorXd>(theta_bar + L.b_offset, L.out); };

  // Reverse of the gradient pass, walking it forwards from G[0].
  Eigen::MatrixXd Gb = U_bar;
  for (std::size_t k = 1; k < nl; ++k) {
    const auto& L = layers_[k - 1];
    Eigen::Map<const Eigen::MatrixXd> W(theta + L.w_offset, L.out, L.in);
    if (theta_bar) W_bar(L).noalias() += D[k] * Gb.transpose();
    const Eigen::MatrixXd Db = W * Gb;
    A_bar[k].array() += Db.array() * G[k].array() * (-2.0 * A[k].array());
    Gb = Db.cwiseProduct((1.0 - A[k].array().square()).matrix());
  }
  if (theta_bar) {
    Eigen::Map<Eigen::VectorXd> wb(theta_bar + last.w_offset, last.in);
    wb += Gb.rowwise().sum();
    wb += A[nl - 1] * c.transpose();
    theta_bar[last.b_offset] += c.sum();
  }
  A_bar[nl - 1] += w * c;

  // Reverse of the forward pass.
  for (std::size_t k = nl - 1; k >= 1; --k) {
    const auto& L = layers_[k - 1];
    Eigen::Map<const Eigen::MatrixXd> W(theta + L.w_offset, L.out, L.in);
    const Eigen::MatrixXd Zb = A_bar[k].cwiseProduct((1.0 - A[k].array().square()).matrix());
    if (theta_bar) {
      W_bar(L).noalias() += Zb * A[k - 1].transpose();
      b_bar(L) += Zb.rowwise().sum();
    }
    A_bar[k - 1].noalias() += W.transpose() * Zb;
  }
  return A_bar[0];
}

// ---------------------------------------------------------------- ScalarFieldModel

ScalarFieldModel::ScalarFieldModel(ModelArchitecture arch, std::uint64_t seed)
    : arch_(std::move(arch)), seed_(seed) {
  build();
  switch (arch_.variant) {
    case ModelVariant::dense:
      dense_.initialize(theta_.data(), derive_seed(seed, Stream::model_init, 0));
      break;
    case ModelVariant::separable:
      q_net_.initialize(theta_.data(), derive_seed(seed, Stream::model_init, 1));
      p_net_.initialize(theta_.data() + q_net_.num_parameters(), derive_seed(seed, Stream::model_init, 2));
      break;
    case ModelVariant::quadratic: {
      Rng rng(derive_seed(seed, Stream::model_init, 3));
      const double bound = 1.0 / std::sqrt(static_cast<double>(arch_.state_dim));
      for (Eigen::Index k = 0; k < theta_.size(); ++k) theta_(k) = rng.uniform(-bound, bound);
      break;
    }
  }
}

void ScalarFieldModel::build() {
  const int n = arch_.state_dim;
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("ScalarFieldModel: state_dim must be even and >= 2");
  auto widths = [&](int input) {
    std::vector<int> w{input};
    w.insert(w.end(), arch_.hidden.begin(), arch_.hidden.end());
    w.push_back(1);
    return w;
  };
  switch (arch_.variant) {
    case ModelVariant::dense:
      dense_ = Mlp(widths(n));
      theta_ = Eigen::VectorXd::Zero(dense_.num_parameters());
      break;
    case ModelVariant::separable:
      q_net_ = Mlp(widths(n / 2));
      p_net_ = Mlp(widths(n / 2));
      theta_ = Eigen::VectorXd::Zero(q_net_.num_parameters() + p_net_.num_parameters());
      break;
    case ModelVariant::quadratic:
      theta_ = Eigen::VectorXd::Zero(n * (n + 1) / 2);
      break;
  }
}

void ScalarFieldModel::set_parameters(const Eigen::VectorXd& theta) {
  if (theta.size() != theta_.size()) throw std::invalid_argument("set_parameters: size mismatch");
  theta_ = theta;
}

Eigen::MatrixXd ScalarFieldModel::quadratic_S() const {
  const int n = arch_.state_dim;
  Eigen::MatrixXd S(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) S(i, j) = S(j, i) = theta_(k++);
  return S;
}

Eigen::RowVectorXd ScalarFieldModel::forward_batch(const Eigen::MatrixXd& X) const {
  const int d = arch_.state_dim / 2;
  switch (arch_.variant) {
    case ModelVariant::dense: return dense_.value(theta_.data(), X);
    case ModelVariant::separable:
      return q_net_.value(theta_.data(), X.topRows(d)) +
             p_net_.value(theta_.data() + q_net_.num_parameters(), X.bottomRows(d));
    case ModelVariant::quadratic: {
      const Eigen::MatrixXd S = quadratic_S();
      return 0.5 * (X.array() * (S * X).array()).colwise().sum().matrix();
    }
  }
  return {};
}

Eigen::MatrixXd ScalarFieldModel::input_gradient_batch(const Eigen::MatrixXd& X) const {
  const int d = arch_.state_dim / 2;
  switch (arch_.variant) {
    case ModelVariant::dense: return dense_.gradient(theta_.data(), X);
    case ModelVariant::separable: {
      Eigen::MatrixXd G(X.rows(), X.cols());
      G.topRows(d) = q_net_.gradient(theta_.data(), X.topRows(d));
      G.bottomRows(d) = p_net_.gradient(theta_.data() + q_net_.num_parameters(), X.bottomRows(d));
      return G;
    }
    case ModelVariant::quadratic: return quadratic_S() * X;
  }
  return {};
}

double ScalarFieldModel::forward(const Eigen::VectorXd& y) const { return forward_batch(y)(0); }

Eigen::VectorXd ScalarFieldModel::input_gradient(const Eigen::VectorXd& y) const {
  return input_gradient_batch(y).col(0);
}

Eigen::VectorXd ScalarFieldModel::vector_field(const Eigen::VectorXd& y) const {
  return apply_J(input_gradient(y));
}

Eigen::MatrixXd ScalarFieldModel::backward(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U_bar,
                                           const Eigen::RowVectorXd& c, Eigen::VectorXd* theta_bar) const {
  if (theta_bar && theta_bar->size() != theta_.size()) throw std::invalid_argument("backward: theta_bar size");
  double* tb = theta_bar ? theta_bar->data() : nullptr;
  const int d = arch_.state_dim / 2;
  switch (arch_.variant) {
    case ModelVariant::dense: return dense_.backward(theta_.data(), X, U_bar, c, tb);
    case ModelVariant::separable: {
      Eigen::MatrixXd Xb(X.rows(), X.cols());
      Xb.topRows(d) = q_net_.backward(theta_.data(), X.topRows(d), U_bar.topRows(d), c, tb);
      Xb.bottomRows(d) = p_net_.backward(theta_.data() + q_net_.num_parameters(), X.bottomRows(d),
                                         U_bar.bottomRows(d), c, tb ? tb + q_net_.num_parameters() : nullptr);
      return Xb;
    }
    case ModelVariant::quadratic: {
      const Eigen::MatrixXd S = quadratic_S();
      Eigen::MatrixXd Xb = S * U_bar + (S * X) * c.asDiagonal();
      if (tb) {
        const Eigen::MatrixXd M = U_bar * X.transpose() + 0.5 * X * c.asDiagonal() * X.transpose();
        const int n = arch_.state_dim;
        int k = 0;
        for (int i = 0; i < n; ++i)
          for (int j = i; j < n; ++j) tb[k++] += i == j ? M(i, i) : M(i, j) + M(j, i);
      }
      return Xb;
    }
  }
  return {};
}

Eigen::MatrixXd ScalarFieldModel::input_hessian(const Eigen::VectorXd& y) const {
  const auto n = y.size();
  const Eigen::MatrixXd X = y.replicate(1, n);
  const Eigen::MatrixXd Hm = backward(X, Eigen::MatrixXd::Identity(n, n), Eigen::RowVectorXd::Zero(n), nullptr);
  return 0.5 * (Hm + Hm.transpose());
}

Eigen::MatrixXd ScalarFieldModel::field(const Eigen::MatrixXd& X) const {
  return apply_J(input_gradient_batch(X));
}

Eigen::MatrixXd ScalarFieldModel::field_vjp(const Eigen::MatrixXd& X, const Eigen::MatrixXd& F_bar,
                                            Eigen::VectorXd* theta_bar) const {
  // F = J G, so G_bar = J^T F_bar = -J F_bar.
  return backward(X, -apply_J(F_bar), Eigen::RowVectorXd::Zero(X.cols()), theta_bar);
}

VectorField ScalarFieldModel::as_vector_field() const {
  auto self = std::make_shared<const ScalarFieldModel>(*this);
  VectorField v;
  v.dim = arch_.state_dim;
  v.f = [self](const Eigen::VectorXd& y) { return self->vector_field(y); };
  v.df = [self](const Eigen::VectorXd& y) { return apply_J(self->input_hessian(y)); };
  return v;
}

void ScalarFieldModel::save(const std::string& path, const std::string& metadata_json) const {
  nlohmann::json header;
  header["format"] = "mii-model";
  header["version"] = 1;
  header["architecture"] = {{"variant", to_string(arch_.variant)},
                            {"state_dim", arch_.state_dim},
                            {"hidden", arch_.hidden},
                            {"activation", "tanh"}};
  header["seed"] = seed_;
  header["num_parameters"] = theta_.size();
  header["metadata"] = nlohmann::json::parse(metadata_json);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << header.dump() << '\n';
  for (Eigen::Index k = 0; k < theta_.size(); ++k) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(theta_(k));
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    unsigned char bytes[8];
    std::memcpy(bytes, &bits, 8);
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
  if (!out) throw std::runtime_error("error writing checkpoint '" + path + "'");
}

ScalarFieldModel ScalarFieldModel::load(const std::string& path, std::string* metadata_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::string line;
  std::getline(in, line);
  const auto header = nlohmann::json::parse(line);
  if (header.value("format", "") != "mii-model") throw std::runtime_error("'" + path + "' is not a model checkpoint");
  ModelArchitecture arch;
  const auto& a = header.at("architecture");
  arch.variant = model_variant_from_string(a.at("variant").get<std::string>());
  arch.state_dim = a.at("state_dim").get<int>();
  arch.hidden = a.at("hidden").get<std::vector<int>>();
  ScalarFieldModel m;
  m.arch_ = arch;
  m.seed_ = header.at("seed").get<std::uint64_t>();
  m.build();
  const auto np = header.at("num_parameters").get<Eigen::Index>();
  if (np != m.theta_.size()) throw std::runtime_error("checkpoint parameter count does not match architecture");
  for (Eigen::Index k = 0; k < np; ++k) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw std::runtime_error("checkpoint '" + path + "' is truncated");
    std::uint64_t bits;
    std::memcpy(&bits, bytes, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    m.theta_(k) = std::bit_cast<double>(bits);
  }
  if (metadata_json) *metadata_json = header.value("metadata", nlohmann::json::object()).dump();
  return m;
}

}  // namespace mii
