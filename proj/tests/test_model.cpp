#include "helpers.hpp"
#include "mii/model.hpp"
#include "mii/random.hpp"
#include "mii/systems.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <fstream>

using namespace mii;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ModelArchitecture arch(ModelVariant v, std::vector<int> hidden = {6, 5}) {
  ModelArchitecture a;
  a.variant = v;
  a.state_dim = 4;
  a.hidden = std::move(hidden);
  return a;
}

}  // namespace

TEST_CASE("parameter counts and deterministic initialisation") {
  const ScalarFieldModel d(arch(ModelVariant::dense), 1);
  CHECK(d.num_parameters() == (4 * 6 + 6) + (6 * 5 + 5) + (5 + 1));
  const ScalarFieldModel s(arch(ModelVariant::separable), 1);
  CHECK(s.num_parameters() == 2 * ((2 * 6 + 6) + (6 * 5 + 5) + (5 + 1)));
  const ScalarFieldModel q(arch(ModelVariant::quadratic), 1);
  CHECK(q.num_parameters() == 10);
  CHECK(ScalarFieldModel(arch(ModelVariant::dense), 1).parameters() == d.parameters());
  CHECK(ScalarFieldModel(arch(ModelVariant::dense), 2).parameters() != d.parameters());
  CHECK(model_variant_from_string(to_string(ModelVariant::separable)) == ModelVariant::separable);
  CHECK_THROWS(model_variant_from_string("conv"));
}

TEST_CASE("golden forward value") {
  const ScalarFieldModel m(arch(ModelVariant::dense, {32, 32}), 1234);
  const VectorXd y = (VectorXd(4) << 0.1, -0.2, 0.3, 0.4).finished();
  CHECK(m.forward(y) == doctest::Approx(-0.094279136834305).epsilon(1e-12));
}

TEST_CASE("zero parameters give the final bias") {
  ScalarFieldModel m(arch(ModelVariant::dense), 1);
  VectorXd th = VectorXd::Zero(m.num_parameters());
  th(th.size() - 1) = 0.75;
  m.set_parameters(th);
  CHECK(m.forward(VectorXd::Constant(4, 0.3)) == 0.75);
  CHECK(m.input_gradient(VectorXd::Constant(4, 0.3)).norm() == 0.0);
}

TEST_CASE("separable model splits into q and p parts") {
  const ScalarFieldModel m(arch(ModelVariant::separable), 3);
  Rng rng(4);
  for (int k = 0; k < 10; ++k) {
    const VectorXd a = rng.uniform_vector(4, -1, 1), b = rng.uniform_vector(4, -1, 1);
    VectorXd a2 = a, b2 = b;
    a2.tail(2) = b.tail(2);
    b2.tail(2) = a.tail(2);
    // H(q, p) - H(q, p') does not depend on q
    CHECK(m.forward(a) - m.forward(a2) == doctest::Approx(m.forward(b2) - m.forward(b)).epsilon(1e-12));
    CHECK(m.input_hessian(a).block(0, 2, 2, 2).norm() == 0.0);
  }
}

TEST_CASE("input gradient, field and Hessian against finite differences") {
  Rng rng(5);
  for (auto v : {ModelVariant::dense, ModelVariant::separable, ModelVariant::quadratic}) {
    for (int k = 0; k < 30; ++k) {
      const ScalarFieldModel m(arch(v), 100 + k);
      const VectorXd y = rng.uniform_vector(4, -1, 1);
      const VectorXd g = m.input_gradient(y);
      CHECK(testutil::rel_err(g, testutil::fd_gradient([&](const VectorXd& x) { return m.forward(x); }, y)) <= 1e-6);
      CHECK(std::abs(m.vector_field(y).dot(g)) <= 1e-12);
      CHECK((m.vector_field(y) - apply_J(g)).norm() <= 1e-15);
      const MatrixXd Hs = m.input_hessian(y);
      for (int i = 0; i < 4; ++i) {
        auto gi = [&](const VectorXd& x) { return m.input_gradient(x)(i); };
        CHECK(testutil::rel_err(Hs.row(i).transpose(), testutil::fd_gradient(gi, y)) <= 1e-6);
      }
    }
  }
}

TEST_CASE("batched evaluation matches single evaluation") {
  const ScalarFieldModel m(arch(ModelVariant::dense), 6);
  Rng rng(6);
  const MatrixXd X = MatrixXd::NullaryExpr(4, 7, [&]() { return rng.uniform(-1, 1); });
  const auto Hb = m.forward_batch(X);
  const MatrixXd F = m.field(X);
  for (int k = 0; k < 7; ++k) {
    CHECK(Hb(k) == doctest::Approx(m.forward(X.col(k))).epsilon(1e-15));
    CHECK((F.col(k) - m.vector_field(X.col(k))).norm() <= 1e-15);
  }
}

TEST_CASE("second-order parameter gradient") {
  Rng rng(7);
  for (auto v : {ModelVariant::dense, ModelVariant::separable, ModelVariant::quadratic}) {
    const ScalarFieldModel m(arch(v, {4, 3}), 8);
    const MatrixXd X = MatrixXd::NullaryExpr(4, 3, [&]() { return rng.uniform(-1, 1); });
    const MatrixXd Fb = MatrixXd::NullaryExpr(4, 3, [&]() { return rng.normal(); });
    VectorXd tb = VectorXd::Zero(m.num_parameters());
    m.field_vjp(X, Fb, &tb);
    auto phi = [&](const VectorXd& th) {
      ScalarFieldModel c = m;
      c.set_parameters(th);
      return (c.field(X).array() * Fb.array()).sum();
    };
    CHECK(testutil::rel_err(tb, testutil::fd_gradient(phi, m.parameters())) <= 1e-5);
    // doubling the cotangent doubles the gradient
    VectorXd tb2 = VectorXd::Zero(m.num_parameters());
    m.field_vjp(X, 2 * Fb, &tb2);
    CHECK((tb2 - 2 * tb).norm() <= 1e-12 * tb.norm());
  }
}

TEST_CASE("quadratic variant has a closed-form second-order gradient") {
  // H = 1/2 y^T S y, f = J S y, d<Fb, J S y>/dS_ij for the upper-triangular parametrisation
  ScalarFieldModel m(arch(ModelVariant::quadratic), 9);
  Rng rng(9);
  const VectorXd y = rng.uniform_vector(4, -1, 1);
  const VectorXd fb = rng.normal_vector(4);
  VectorXd tb = VectorXd::Zero(10);
  m.field_vjp(y, fb, &tb);
  const VectorXd u = -apply_J(fb);  // J^T fb
  VectorXd expect(10);
  int k = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) expect(k++) = i == j ? u(i) * y(i) : u(i) * y(j) + u(j) * y(i);
  CHECK((tb - expect).norm() <= 1e-12);
}

TEST_CASE("unused parameter block has zero gradient") {
  // separable model on inputs with p = 0 and a cotangent that only sees the q-equations
  const ScalarFieldModel m(arch(ModelVariant::separable), 10);
  MatrixXd X = MatrixXd::Zero(4, 2);
  X.topRows(2) << 0.3, -0.1, 0.2, 0.5;
  MatrixXd Fb = MatrixXd::Zero(4, 2);
  Fb.bottomRows(2).setOnes();  // dp/dt = -dH1/dq only involves the q-net
  VectorXd tb = VectorXd::Zero(m.num_parameters());
  m.field_vjp(X, Fb, &tb);
  CHECK(tb.tail(m.num_parameters() / 2).norm() == 0.0);
  CHECK(tb.head(m.num_parameters() / 2).norm() > 0.0);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const ScalarFieldModel m(arch(ModelVariant::separable, {8}), 11);
  const std::string path = "model_roundtrip.ckpt";
  m.save(path, R"({"note": "x"})");
  std::string meta;
  const ScalarFieldModel r = ScalarFieldModel::load(path, &meta);
  CHECK(std::memcmp(r.parameters().data(), m.parameters().data(), sizeof(double) * m.num_parameters()) == 0);
  CHECK(r.architecture().variant == ModelVariant::separable);
  CHECK(nlohmann::json::parse(meta)["note"] == "x");
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  const auto j = nlohmann::json::parse(header);
  CHECK(j["seed"] == 11);
  CHECK(j["num_parameters"] == m.num_parameters());
  std::remove(path.c_str());
  CHECK_THROWS(ScalarFieldModel::load("does_not_exist.ckpt"));
}

TEST_CASE("as_vector_field Jacobian is J times the Hessian") {
  const ScalarFieldModel m(arch(ModelVariant::dense), 12);
  const VectorField f = m.as_vector_field();
  const VectorXd y = (VectorXd(4) << 0.1, 0.2, -0.3, 0.05).finished();
  CHECK((f.df(y) - apply_J(MatrixXd(m.input_hessian(y)))).norm() <= 1e-14);
}
