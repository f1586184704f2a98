#include "helpers.hpp"
#include "mii/experiments.hpp"
#include "mii/graph.hpp"
#include "mii/lbfgs.hpp"
#include "mii/mii_operator.hpp"
#include "mii/random.hpp"
#include "mii/training.hpp"

#include <doctest.h>

#include <mutex>

using namespace mii;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Wraps a field and records every column it is evaluated on.
class RecordingField final : public DifferentiableField {
 public:
  explicit RecordingField(const DifferentiableField& inner) : inner_(inner) {}
  int dim() const override { return inner_.dim(); }
  int num_parameters() const override { return inner_.num_parameters(); }
  MatrixXd field(const MatrixXd& X) const override {
    std::lock_guard<std::mutex> g(lock_);
    for (Eigen::Index k = 0; k < X.cols(); ++k) seen.push_back(X.col(k));
    return inner_.field(X);
  }
  MatrixXd field_vjp(const MatrixXd& X, const MatrixXd& Fb, VectorXd* tb) const override {
    return inner_.field_vjp(X, Fb, tb);
  }
  mutable std::vector<VectorXd> seen;

 private:
  const DifferentiableField& inner_;
  mutable std::mutex lock_;
};

DataSet from_trajectories(std::vector<Trajectory> ts, double h, const std::string& system = "henon_heiles") {
  DataSet d;
  d.system = system;
  d.h = h;
  d.N1 = ts.front().steps();
  d.noisy = ts;
  d.clean = ts;
  return d;
}

DataSet small_noisy(int N2, int N1, double h, double sigma, std::uint64_t seed, const std::string& sys = "henon_heiles") {
  DataSpec s;
  s.system = sys;
  s.N2 = N2;
  s.N1 = N1;
  s.h = h;
  s.sigma = sigma;
  s.seed = seed;
  return generate_dataset(s);
}

ModelArchitecture tiny(ModelVariant v, std::vector<int> hidden = {3}) {
  ModelArchitecture a;
  a.variant = v;
  a.state_dim = 4;
  a.hidden = std::move(hidden);
  return a;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(parse_method("MII-MIRK4").kind == MethodKind::mii);
  CHECK(parse_method("mii:mirk4").label() == "MII-MIRK4");
  CHECK(parse_method("MIRK4-OS").id() == "onestep:mirk4");
  CHECK(parse_method("onestep:rk4").label() == "RK4-OS");
  CHECK(parse_method("Midpoint-OS").integrator == "midpoint");
  CHECK(parse_method("ISO-Stormer").label() == "ISO-Stormer");
  CHECK(parse_method("iso:rk4").kind == MethodKind::iso);
  CHECK(parse_method("mii:rk4").kind == MethodKind::mii);  // explicit methods embed with v = 0
  CHECK_THROWS(parse_method("mii:gl4"));
  CHECK_THROWS(parse_method("iso:mirk4"));
  CHECK_THROWS(parse_method("nonsense"));
}

TEST_CASE("one-step loss oracles") {
  const auto sys = henon_heiles();
  const SystemField truth(sys);
  const VectorXd y0 = (VectorXd(4) << 0.2, -0.1, 0.15, 0.3).finished();
  // data produced by the implicit midpoint itself
  const Trajectory mp = integrate(make_stepper("midpoint", sys, {SolverKind::newton, 1e-15, 50}), y0, 0.1, 6);
  const DataSet d = from_trajectories({mp}, 0.1);
  CHECK(one_step_loss(truth, d, "midpoint", false).value <= 1e-20);
  const SystemField zero(zero_system(2));
  double expect = 0;
  for (int n = 0; n < 6; ++n) expect += (mp.point(n + 1) - mp.point(n)).squaredNorm();
  CHECK(one_step_loss(zero, d, "mirk4", false).value == doctest::Approx(expect).epsilon(1e-14));
  CHECK(one_step_loss(zero, d, "rk4", false).value == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("explicit one-step loss never looks at the next point") {
  const DataSet d = small_noisy(2, 5, 0.1, 0.05, 3);
  const ScalarFieldModel m(tiny(ModelVariant::dense), 1);
  RecordingField rec(m);
  one_step_loss(rec, d, "rk4", true);
  // interior points start the following step, so only the last one is never an input
  for (const auto& tr : d.noisy)
    for (const auto& x : rec.seen) CHECK((x - tr.point(tr.steps())).norm() > 0);
}

TEST_CASE("MIRK4 one-step loss evaluates 2n-1 columns per trajectory with sharing") {
  const DataSet d = small_noisy(3, 7, 0.1, 0.05, 4);
  const ScalarFieldModel m(tiny(ModelVariant::dense), 1);
  const MirkTableau mirk4 = *find_tableau("mirk4").mirk;
  CHECK(one_step_loss(m, d, mirk4, false, true).field_evaluations == 3 * (2 * 8 - 1));
  CHECK(one_step_loss(m, d, mirk4, false, false).field_evaluations == 3 * 3 * 7);
  CHECK(one_step_loss(m, d, "midpoint", false).field_evaluations == 3 * 7);
  const double a = one_step_loss(m, d, mirk4, false, true).value;
  CHECK(one_step_loss(m, d, mirk4, false, false).value == doctest::Approx(a).epsilon(1e-14));
}

TEST_CASE("MII loss oracles") {
  const SystemField zero(zero_system(2));
  Trajectory t;
  t.h = 0.1;
  t.points = (MatrixXd(2, 4) << 0.1, 0.2, 0.3, 0.4, -0.2, 0.5, 0.1, 0.0).finished();
  const DataSet one = from_trajectories({t}, 0.1);
  const MirkTableau mirk4 = *find_tableau("mirk4").mirk;
  CHECK(mii_loss(zero, one, mirk4, false).value ==
        doctest::Approx(2 * (t.point(1) - t.point(0)).squaredNorm()).epsilon(1e-14));

  // N = 3 against the explicit matrix expression
  const auto sys = henon_heiles();
  const SystemField truth(sys);
  Rng rng(5);
  Trajectory n3;
  n3.h = 0.2;
  n3.points = MatrixXd::NullaryExpr(4, 4, [&]() { return rng.uniform(-0.5, 0.5); });
  const DataSet d3 = from_trajectories({n3}, 0.2);
  const MatrixXd Ybar = mii_apply(build_uw(3), n3, mirk4, hamiltonian_field(sys));
  CHECK(mii_loss(truth, d3, mirk4, false).value ==
        doctest::Approx((n3.points - Ybar).squaredNorm()).epsilon(1e-12));
}

TEST_CASE("MII loss on exact data shrinks with h") {
  const auto sys = henon_heiles();
  const SystemField truth(sys);
  const MirkTableau mirk4 = *find_tableau("mirk4").mirk;
  const VectorXd y0 = (VectorXd(4) << 0.2, -0.1, 0.15, 0.3).finished();
  std::vector<double> hs, losses;
  for (double h : {0.2, 0.1, 0.05}) {
    hs.push_back(h);
    losses.push_back(mii_loss(truth, from_trajectories({reference_solve(sys, y0, h, 8)}, h), mirk4, false).value);
  }
  CHECK(losses[1] < losses[0]);
  CHECK(losses[2] < losses[1]);
  CHECK(loglog_slope(hs, losses) >= 7.5);
}

TEST_CASE("ISO roll-out loss oracles") {
  const SystemField zero(zero_system(2));
  const DataSet d = small_noisy(2, 4, 0.1, 0.05, 6);
  MatrixXd y0(4, 2);
  for (int k = 0; k < 2; ++k) y0.col(k) = d.noisy[k].point(0);
  double expect = 0;
  for (int k = 0; k < 2; ++k)
    for (int n = 1; n <= 4; ++n) expect += (d.noisy[k].point(n) - y0.col(k)).squaredNorm();
  CHECK(iso_rollout_loss(zero, d, "rk4", y0, false).value == doctest::Approx(expect).epsilon(1e-14));
  const MatrixXd opt = optimize_initial_states(zero, d, "rk4", y0);
  for (int k = 0; k < 2; ++k) {
    VectorXd mean = VectorXd::Zero(4);
    for (int n = 1; n <= 4; ++n) mean += d.noisy[k].point(n) / 4;
    CHECK((opt.col(k) - mean).norm() <= 1e-6);
  }
  // true field, exact start: loss decreases with h
  const auto sys = henon_heiles();
  const SystemField truth(sys);
  const VectorXd s = (VectorXd(4) << 0.2, -0.1, 0.15, 0.3).finished();
  double prev = 1e300;
  for (double h : {0.4, 0.2, 0.1}) {
    const DataSet e = from_trajectories({reference_solve(sys, s, h, 4)}, h);
    const double v = iso_rollout_loss(truth, e, "rk4", s, false).value;
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("initial-state optimisation recovers the start of a linear flow") {
  // H = 1/2 |y|^2: the flow is a rotation, so the roll-out is exact up to RK4 error
  const auto sys = quadratic_system(MatrixXd::Identity(4, 4));
  const SystemField truth(sys);
  const VectorXd s = (VectorXd(4) << 0.3, -0.2, 0.1, 0.4).finished();
  Trajectory t = reference_solve(sys, s, 0.1, 8);
  Rng rng(7);
  const double sigma = 0.01;
  for (Eigen::Index i = 0; i < t.points.size(); ++i) t.points.data()[i] += rng.normal(0, sigma);
  const DataSet d = from_trajectories({t}, 0.1, "quadratic");
  const MatrixXd opt = optimize_initial_states(truth, d, "rk4", t.point(0));
  CHECK((opt.col(0) - s).norm() <= 2 * sigma);
  CHECK((opt.col(0) - s).norm() < (t.point(0) - s).norm());
}

TEST_CASE("loss gradients against finite differences on a 10-parameter model") {
  const DataSet d = small_noisy(1, 2, 0.1, 0.05, 8);  // one 3-point trajectory
  const ScalarFieldModel m(tiny(ModelVariant::quadratic), 9);
  REQUIRE(m.num_parameters() == 10);
  const MirkTableau mirk4 = *find_tableau("mirk4").mirk;
  auto check = [&](const std::function<LossResult(const ScalarFieldModel&, bool)>& L) {
    const VectorXd g = L(m, true).gradient;
    auto val = [&](const VectorXd& th) {
      ScalarFieldModel c = m;
      c.set_parameters(th);
      return L(c, false).value;
    };
    CHECK(testutil::rel_err(g, testutil::fd_gradient(val, m.parameters())) <= 1e-5);
  };
  check([&](const ScalarFieldModel& x, bool g) { return one_step_loss(x, d, mirk4, g); });
  check([&](const ScalarFieldModel& x, bool g) { return one_step_loss(x, d, "midpoint", g); });
  check([&](const ScalarFieldModel& x, bool g) { return mii_loss(x, d, mirk4, g); });
  const MatrixXd y0 = d.noisy[0].point(0);
  check([&](const ScalarFieldModel& x, bool g) { return iso_rollout_loss(x, d, "rk4", y0, g); });
  const ScalarFieldModel sep(tiny(ModelVariant::separable, {2}), 9);
  auto check_sep = [&](const std::function<LossResult(const ScalarFieldModel&, bool)>& L) {
    const VectorXd g = L(sep, true).gradient;
    auto val = [&](const VectorXd& th) {
      ScalarFieldModel c = sep;
      c.set_parameters(th);
      return L(c, false).value;
    };
    CHECK(testutil::rel_err(g, testutil::fd_gradient(val, sep.parameters())) <= 1e-5);
  };
  check_sep([&](const ScalarFieldModel& x, bool g) { return one_step_loss(x, d, "stormer_verlet", g); });
  check_sep([&](const ScalarFieldModel& x, bool g) { return iso_rollout_loss(x, d, "stormer_verlet", y0, g); });
}

TEST_CASE("graph tape gradients") {
  const auto sys = henon_heiles();
  const ScalarFieldModel m(tiny(ModelVariant::dense), 10);
  Rng rng(10);
  const MatrixXd X0 = MatrixXd::NullaryExpr(4, 5, [&]() { return rng.uniform(-0.5, 0.5); });
  Graph::Sparse S(5, 3);
  S.insert(0, 0) = 1;
  S.insert(2, 1) = -0.5;
  S.insert(4, 2) = 2;
  auto build = [&](const MatrixXd& X, Graph& g) {
    const auto x = g.variable(X);
    const auto f = g.field(x, m);
    const auto z = g.lincomb({{x, 1.0}, {f, 0.3}});
    const auto r = g.right_multiply(z, S);
    const auto q = g.mask_rows(r, 1, 2);
    return g.set_loss({{q, 1.0}, {f, 0.5}});
  };
  Graph g(m.num_parameters());
  build(X0, g);
  g.backward();
  CHECK(g.field_evaluations() == 5);
  const VectorXd flat = Eigen::Map<const VectorXd>(X0.data(), X0.size());
  auto val = [&](const VectorXd& v) {
    Graph h(m.num_parameters());
    return build(Eigen::Map<const MatrixXd>(v.data(), 4, 5), h);
  };
  const MatrixXd& adj = g.adjoint(0);
  CHECK(testutil::rel_err(Eigen::Map<const VectorXd>(adj.data(), adj.size()), testutil::fd_gradient(val, flat)) <= 1e-6);
  auto val_theta = [&](const VectorXd& th) {
    ScalarFieldModel c = m;
    c.set_parameters(th);
    Graph h(c.num_parameters());
    const auto x = h.variable(X0);
    const auto f = h.field(x, c);
    const auto z = h.lincomb({{x, 1.0}, {f, 0.3}});
    const auto q = h.mask_rows(h.right_multiply(z, S), 1, 2);
    return h.set_loss({{q, 1.0}, {f, 0.5}});
  };
  CHECK(testutil::rel_err(g.parameter_gradient(), testutil::fd_gradient(val_theta, m.parameters())) <= 1e-6);
}

TEST_CASE("L-BFGS and Adam") {
  // Rosenbrock
  Objective rosen = [](const VectorXd& x, VectorXd& g) {
    g.resize(2);
    g(0) = -2 * (1 - x(0)) - 400 * x(0) * (x(1) - x(0) * x(0));
    g(1) = 200 * (x(1) - x(0) * x(0));
    return (1 - x(0)) * (1 - x(0)) + 100 * std::pow(x(1) - x(0) * x(0), 2);
  };
  LbfgsSettings s;
  s.max_iterations = 200;
  s.grad_tolerance = 1e-12;
  s.change_tolerance = 1e-15;
  const auto r = lbfgs_minimize(rosen, (VectorXd(2) << -1.2, 1).finished(), s);
  CHECK((r.x - VectorXd::Ones(2)).norm() <= 1e-5);
  CHECK(r.f <= r.f_initial);
  // convex quadratic in 10 dimensions converges within the default iteration budget
  Rng rng(11);
  MatrixXd B = MatrixXd::NullaryExpr(10, 10, [&]() { return rng.normal(); });
  const MatrixXd A = B * B.transpose() + MatrixXd::Identity(10, 10);
  const VectorXd c = rng.normal_vector(10);
  Objective quad = [&](const VectorXd& x, VectorXd& g) {
    g = A * x - c;
    return 0.5 * x.dot(A * x) - c.dot(x);
  };
  LbfgsSettings qs;
  qs.grad_tolerance = 1e-12;
  qs.change_tolerance = 1e-15;
  const auto q = lbfgs_minimize(quad, VectorXd::Zero(10), qs);
  CHECK((q.x - A.ldlt().solve(c)).norm() <= 1e-6);
  AdamSettings as;
  as.learning_rate = 1e-2;
  const auto a = adam_minimize(quad, VectorXd::Zero(10), as);
  CHECK(a.f < a.f_initial);
}

TEST_CASE("training a quadratic model on exact linear data recovers the field") {
  const auto sys = quadratic_system(MatrixXd::Identity(4, 4));
  Rng rng(12);
  std::vector<Trajectory> ts;
  for (int k = 0; k < 4; ++k) ts.push_back(reference_solve(sys, rng.uniform_vector(4, -0.5, 0.5), 0.1, 6));
  const DataSet d = from_trajectories(ts, 0.1, "quadratic");
  TrainConfig cfg;
  cfg.method = parse_method("MIRK4-OS");
  cfg.architecture = tiny(ModelVariant::quadratic);
  cfg.seed = 1;
  const TrainResult r = train(cfg, d);
  const VectorXd y = (VectorXd(4) << 0.2, 0.1, -0.3, 0.25).finished();
  CHECK(testutil::rel_err(r.model.vector_field(y), sys.field(y)) <= 1e-3);
}

TEST_CASE("training schedule, determinism and loss decrease") {
  const DataSet d = small_noisy(4, 4, 0.1, 0.05, 13);
  TrainConfig cfg;
  cfg.method = parse_method("MII-MIRK4");
  cfg.architecture = tiny(ModelVariant::separable, {8});
  cfg.seed = 5;
  cfg.epochs = 3;
  cfg.pretrain_epochs = 1;
  cfg.lbfgs.max_iterations = 10;
  const TrainResult a = train(cfg, d);
  const TrainResult b = train(cfg, d);
  CHECK(a.model.parameters() == b.model.parameters());
  REQUIRE(a.history.size() == 3);
  CHECK(a.history[0].phase == "pretrain");
  CHECK(a.history[0].loss_kind == "one_step");
  CHECK(a.history[1].loss_kind == "mii");
  for (const auto& e : a.history) CHECK(e.loss <= e.loss_before);
  cfg.method = parse_method("ISO-Stormer");
  const TrainResult iso = train(cfg, d);
  CHECK(iso.history[2].loss_kind == "iso");
  cfg.architecture = tiny(ModelVariant::dense);
  CHECK_THROWS_WITH(train(cfg, d), doctest::Contains("separab"));
  cfg.epochs = 0;
  CHECK_THROWS(train(cfg, d));
}

TEST_CASE("flow error oracles") {
  const auto sys = henon_heiles();
  const auto pts = sample_shell(10, 4, 0.3, 0.6, 14);
  CHECK(flow_error(hamiltonian_field(sys), sys, pts, 0.1).e <= 1e-9);
  const auto rep = flow_error(zero_field(4), sys, pts, 0.1);
  double expect = 0;
  for (const auto& p : pts) expect += (reference_solve(sys, p, 0.1, 1).point(1) - p).norm() / 10;
  CHECK(rep.e == doctest::Approx(expect).epsilon(1e-12));
  CHECK(rep.M == 10);
  CHECK(rep.errors.size() == 10);
}

TEST_CASE("noise-free training beats noisy training") {
  ExperimentConfig cfg;
  cfg.seed = 15;
  cfg.data.N2 = 10;
  cfg.hidden = {16, 16};
  cfg.train.lbfgs.max_iterations = 30;
  const auto clean = run_cell(cfg, "henon_heiles", "MIRK4-OS", 0.1, 16, 0.0, 0);
  const auto noisy = run_cell(cfg, "henon_heiles", "MIRK4-OS", 0.1, 16, 0.05, 0);
  REQUIRE(clean.status == "ok");
  REQUIRE(noisy.status == "ok");
  CHECK(clean.flow_error < noisy.flow_error);
}
