#include "mii/training.hpp"

#include "mii/graph.hpp"
#include "mii/mii_operator.hpp"
#include "mii/parallel.hpp"
#include "mii/random.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace mii {

namespace {

using Sparse = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

bool is_stormer(const std::string& s) { return s == "stormer_verlet" || s == "stormer" || s == "sv"; }

std::string upper(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

// All sample points side by side (columns), with selectors for step starts/ends.
struct Layout {
  Eigen::MatrixXd Y;  // dim x P
  Sparse S0, S1;      // P x Q
  std::vector<int> point_offset;
  std::vector<int> step_offset;
};

Layout make_layout(const DataSet& data) {
  if (data.noisy.empty()) throw std::invalid_argument("loss: empty data set");
  Layout L;
  int P = 0, Q = 0;
  for (const auto& tr : data.noisy) {
    if (tr.steps() < 1) throw std::invalid_argument("loss: trajectory with fewer than two points");
    L.point_offset.push_back(P);
    L.step_offset.push_back(Q);
    P += tr.steps() + 1;
    Q += tr.steps();
  }
  const int dim = data.dim();
  L.Y.resize(dim, P);
  std::vector<Triplet> t0, t1;
  for (std::size_t k = 0; k < data.noisy.size(); ++k) {
    const auto& tr = data.noisy[k];
    L.Y.middleCols(L.point_offset[k], tr.steps() + 1) = tr.points.transpose();
    for (int n = 0; n < tr.steps(); ++n) {
      t0.emplace_back(L.point_offset[k] + n, L.step_offset[k] + n, 1.0);
      t1.emplace_back(L.point_offset[k] + n + 1, L.step_offset[k] + n, 1.0);
    }
  }
  L.S0.resize(P, Q);
  L.S1.resize(P, Q);
  L.S0.setFromTriplets(t0.begin(), t0.end());
  L.S1.setFromTriplets(t1.begin(), t1.end());
  return L;
}

// Increments Psi (dim x Q) of a MIRK method over every step in the layout.
Graph::Id build_increments(Graph& g, Graph::Id Y, Graph::Id Y0, Graph::Id Y1, const Layout& L,
                           const MirkTableau& m, double h, const DifferentiableField& field, bool share) {
  const int s = m.stages();
  bool need0 = false, need1 = false;
  for (int i = 0; i < s && share; ++i) {
    const int kind = endpoint_stage_kind(m, i);
    need0 |= kind == 0;
    need1 |= kind == 1;
  }
  // Shared endpoint evaluations: f at every point when both ends are stages,
  // otherwise only at the points actually used.
  Graph::Id F_all = -1, F0 = -1, F1 = -1;
  if (need0 && need1) {
    F_all = g.field(Y, field);
    F0 = g.right_multiply(F_all, L.S0);
    F1 = g.right_multiply(F_all, L.S1);
  } else if (need0) {
    F0 = g.field(Y0, field);
  } else if (need1) {
    F1 = g.field(Y1, field);
  }

  std::vector<Graph::Id> K(static_cast<std::size_t>(s));
  std::vector<std::pair<Graph::Id, double>> psi_terms;
  for (int i = 0; i < s; ++i) {
    const int kind = share ? endpoint_stage_kind(m, i) : -1;
    Graph::Id Ki;
    if (kind == 0) {
      Ki = F0;
    } else if (kind == 1) {
      Ki = F1;
    } else {
      std::vector<std::pair<Graph::Id, double>> terms;
      if (m.v(i) != 1.0) terms.emplace_back(Y0, 1.0 - m.v(i));
      if (m.v(i) != 0.0) terms.emplace_back(Y1, m.v(i));
      for (int j = 0; j < i; ++j)
        if (m.D(i, j) != 0.0) terms.emplace_back(K[static_cast<std::size_t>(j)], h * m.D(i, j));
      const Graph::Id Xi = terms.size() == 1 && terms[0].second == 1.0 ? terms[0].first : g.lincomb(terms);
      Ki = g.field(Xi, field);
    }
    K[static_cast<std::size_t>(i)] = Ki;
    if (m.b(i) != 0.0) psi_terms.emplace_back(Ki, m.b(i));
  }
  return g.lincomb(psi_terms);
}

// One explicit step applied to every column of X.
Graph::Id explicit_step(Graph& g, Graph::Id X, const std::string& stepper, double h,
                        const DifferentiableField& field) {
  const int d = field.dim() / 2;
  if (is_stormer(stepper)) {
    const Graph::Id F1 = g.field(X, field);
    const Graph::Id P = g.lincomb({{X, 1.0}, {g.mask_rows(F1, d, d), 0.5 * h}});
    const Graph::Id F2 = g.field(P, field);
    const Graph::Id Qn = g.lincomb({{P, 1.0}, {g.mask_rows(F2, 0, d), h}});
    const Graph::Id F3 = g.field(Qn, field);
    return g.lincomb({{Qn, 1.0}, {g.mask_rows(F3, d, d), 0.5 * h}});
  }
  const Tableau& t = find_tableau(stepper).rk;
  if (!t.is_explicit()) throw std::invalid_argument("stepper '" + stepper + "' is not explicit");
  const int s = t.stages();
  std::vector<Graph::Id> K(static_cast<std::size_t>(s));
  std::vector<std::pair<Graph::Id, double>> out{{X, 1.0}};
  for (int i = 0; i < s; ++i) {
    std::vector<std::pair<Graph::Id, double>> terms{{X, 1.0}};
    for (int j = 0; j < i; ++j)
      if (t.A(i, j) != 0.0) terms.emplace_back(K[static_cast<std::size_t>(j)], h * t.A(i, j));
    const Graph::Id Xi = terms.size() == 1 ? X : g.lincomb(terms);
    K[static_cast<std::size_t>(i)] = g.field(Xi, field);
    if (t.b(i) != 0.0) out.emplace_back(K[static_cast<std::size_t>(i)], h * t.b(i));
  }
  return g.lincomb(out);
}

LossResult finish(Graph& g, Graph::Id residual, bool want_gradient) {
  LossResult r;
  r.value = g.set_loss({{residual, 1.0}});
  r.field_evaluations = g.field_evaluations();
  if (want_gradient) {
    g.backward();
    r.gradient = g.parameter_gradient();
  }
  return r;
}

}  // namespace

std::string MethodSpec::label() const {
  const std::string name = is_stormer(integrator) ? "Stormer" : find_tableau(integrator).display_name;
  switch (kind) {
    case MethodKind::one_step: return name + "-OS";
    case MethodKind::mii: return "MII-" + name;
    case MethodKind::iso: return "ISO-" + name;
  }
  return name;
}

std::string MethodSpec::id() const {
  const std::string key = is_stormer(integrator) ? "stormer_verlet" : find_tableau(integrator).key;
  switch (kind) {
    case MethodKind::one_step: return "onestep:" + key;
    case MethodKind::mii: return "mii:" + key;
    case MethodKind::iso: return "iso:" + key;
  }
  return key;
}

MethodSpec parse_method(const std::string& text) {
  MethodSpec m;
  auto integrator_key = [](const std::string& name) -> std::string {
    const std::string u = upper(name);
    if (u == "STORMER" || u == "STÖRMER" || u == "STORMER_VERLET" || u == "SV" || u == "STORMER-VERLET")
      return "stormer_verlet";
    return find_tableau(name).key;
  };
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const std::string kind = text.substr(0, colon), rest = text.substr(colon + 1);
    if (kind == "onestep" || kind == "os") m.kind = MethodKind::one_step;
    else if (kind == "mii") m.kind = MethodKind::mii;
    else if (kind == "iso") m.kind = MethodKind::iso;
    else throw std::invalid_argument("unknown method kind '" + kind + "'");
    m.integrator = integrator_key(rest);
  } else if (text.size() > 3 && upper(text.substr(text.size() - 3)) == "-OS") {
    m.kind = MethodKind::one_step;
    m.integrator = integrator_key(text.substr(0, text.size() - 3));
  } else if (upper(text.substr(0, 4)) == "MII-") {
    m.kind = MethodKind::mii;
    m.integrator = integrator_key(text.substr(4));
  } else if (upper(text.substr(0, 4)) == "ISO-") {
    m.kind = MethodKind::iso;
    m.integrator = integrator_key(text.substr(4));
  } else {
    throw std::invalid_argument("cannot parse method '" + text + "'");
  }
  if (m.kind == MethodKind::mii && (is_stormer(m.integrator) || !find_tableau(m.integrator).mirk))
    throw std::invalid_argument("MII needs an inverse-explicit (MIRK) tableau");
  if (m.kind == MethodKind::iso && !is_stormer(m.integrator) && !find_tableau(m.integrator).rk.is_explicit())
    throw std::invalid_argument("ISO needs an explicit stepper");
  if (m.kind == MethodKind::one_step && !is_stormer(m.integrator) && !find_tableau(m.integrator).mirk)
    throw std::invalid_argument("one-step training needs an explicit or inverse-explicit tableau");
  return m;
}

LossResult one_step_loss(const DifferentiableField& field, const DataSet& data, const MirkTableau& m,
                         bool want_gradient, bool share_endpoint_stages) {
  const Layout L = make_layout(data);
  Graph g(want_gradient ? field.num_parameters() : 0);
  const Graph::Id Y = g.constant(L.Y);
  const Graph::Id Y0 = g.right_multiply(Y, L.S0);
  const Graph::Id Y1 = g.right_multiply(Y, L.S1);
  const Graph::Id psi = build_increments(g, Y, Y0, Y1, L, m, data.h, field, share_endpoint_stages);
  const Graph::Id R = g.lincomb({{Y1, 1.0}, {Y0, -1.0}, {psi, -data.h}});
  return finish(g, R, want_gradient);
}

LossResult one_step_loss(const DifferentiableField& field, const DataSet& data, const std::string& integrator,
                         bool want_gradient, bool share_endpoint_stages) {
  if (!is_stormer(integrator)) {
    const auto& entry = find_tableau(integrator);
    if (!entry.mirk) throw std::invalid_argument("one_step_loss: '" + integrator + "' is not inverse explicit");
    return one_step_loss(field, data, *entry.mirk, want_gradient, share_endpoint_stages);
  }
  const Layout L = make_layout(data);
  Graph g(want_gradient ? field.num_parameters() : 0);
  const Graph::Id Y = g.constant(L.Y);
  const Graph::Id Y0 = g.right_multiply(Y, L.S0);
  const Graph::Id Y1 = g.right_multiply(Y, L.S1);
  const Graph::Id pred = explicit_step(g, Y0, integrator, data.h, field);
  const Graph::Id R = g.lincomb({{Y1, 1.0}, {pred, -1.0}});
  return finish(g, R, want_gradient);
}

LossResult mii_loss(const DifferentiableField& field, const DataSet& data, const MirkTableau& m,
                    bool want_gradient) {
  const Layout L = make_layout(data);
  const auto P = L.Y.cols();
  const auto Q = L.S0.cols();
  // Residual Y - Y_bar = Y (I - U^T/N) - (h/N) Psi W^T per trajectory.
  Eigen::MatrixXd C(L.Y.rows(), P);
  std::vector<Triplet> trip;
  for (std::size_t k = 0; k < data.noisy.size(); ++k) {
    const int N = data.noisy[k].steps();
    const MiiOperator op = build_uw(N);
    const int po = L.point_offset[k], so = L.step_offset[k];
    const Eigen::MatrixXd Yk = L.Y.middleCols(po, N + 1);
    C.middleCols(po, N + 1) = Yk - Yk * op.U.transpose() / N;
    for (int i = 0; i <= N; ++i)
      for (int j = 0; j < N; ++j) trip.emplace_back(so + j, po + i, -data.h / N * op.W(i, j));
  }
  Sparse Mw(Q, P);
  Mw.setFromTriplets(trip.begin(), trip.end());

  Graph g(want_gradient ? field.num_parameters() : 0);
  const Graph::Id Y = g.constant(L.Y);
  const Graph::Id Y0 = g.right_multiply(Y, L.S0);
  const Graph::Id Y1 = g.right_multiply(Y, L.S1);
  const Graph::Id psi = build_increments(g, Y, Y0, Y1, L, m, data.h, field, true);
  const Graph::Id R = g.lincomb({{g.constant(C), 1.0}, {g.right_multiply(psi, Mw), 1.0}});
  return finish(g, R, want_gradient);
}

LossResult iso_rollout_loss(const DifferentiableField& field, const DataSet& data, const std::string& stepper,
                            const Eigen::MatrixXd& y0_hat, bool want_gradient, Eigen::MatrixXd* y0_gradient) {
  const int T = data.trajectories();
  if (T == 0) throw std::invalid_argument("iso_rollout_loss: empty data set");
  const int N = data.noisy.front().steps();
  for (const auto& tr : data.noisy)
    if (tr.steps() != N) throw std::invalid_argument("iso_rollout_loss: trajectories must share N");
  if (y0_hat.rows() != data.dim() || y0_hat.cols() != T)
    throw std::invalid_argument("iso_rollout_loss: y0_hat must be 2d x trajectories");

  Graph g(want_gradient ? field.num_parameters() : 0);
  const Graph::Id Y0 = g.variable(y0_hat);
  Graph::Id Yn = Y0;
  std::vector<std::pair<Graph::Id, double>> terms;
  for (int n = 1; n <= N; ++n) {
    Yn = explicit_step(g, Yn, stepper, data.h, field);
    Eigen::MatrixXd target(data.dim(), T);
    for (int k = 0; k < T; ++k) target.col(k) = data.noisy[static_cast<std::size_t>(k)].point(n);
    terms.emplace_back(g.lincomb({{Yn, 1.0}, {g.constant(target), -1.0}}), 1.0);
  }
  LossResult r;
  r.value = g.set_loss(terms);
  r.field_evaluations = g.field_evaluations();
  if (want_gradient || y0_gradient) {
    g.backward();
    if (want_gradient) r.gradient = g.parameter_gradient();
    if (y0_gradient) *y0_gradient = g.adjoint(Y0);
  }
  return r;
}

Eigen::MatrixXd optimize_initial_states(const DifferentiableField& field, const DataSet& data,
                                        const std::string& stepper, const Eigen::MatrixXd& y0_hat,
                                        const InitialStateSettings& settings) {
  Eigen::MatrixXd out = y0_hat;
  LbfgsSettings ls;
  ls.max_iterations = settings.max_iterations;
  ls.grad_tolerance = settings.grad_tolerance;
  parallel_for(static_cast<std::size_t>(data.trajectories()), [&](std::size_t k) {
    DataSet one;
    one.h = data.h;
    one.noisy = {data.noisy[k]};
    auto objective = [&](const Eigen::VectorXd& y0, Eigen::VectorXd& grad) {
      Eigen::MatrixXd gy;
      const auto r = iso_rollout_loss(field, one, stepper, y0, false, &gy);
      grad = gy.col(0);
      return r.value;
    };
    const auto res = lbfgs_minimize(objective, y0_hat.col(static_cast<Eigen::Index>(k)), ls);
    out.col(static_cast<Eigen::Index>(k)) = res.x;
  });
  return out;
}

TrainResult train(const TrainConfig& config, const DataSet& data) {
  ModelArchitecture arch = config.architecture;
  arch.state_dim = data.dim();
  return train(config, data, ScalarFieldModel(arch, config.seed));
}

TrainResult train(const TrainConfig& config, const DataSet& data, ScalarFieldModel initial) {
  if (config.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (config.pretrain_epochs < 0 || config.pretrain_epochs > config.epochs)
    throw std::invalid_argument("train: pretrain epochs must lie in [0, epochs]");
  if (initial.dim() != data.dim()) throw std::invalid_argument("train: model and data dimensions differ");
  const MethodSpec& method = config.method;
  if (is_stormer(method.integrator) && initial.architecture().variant == ModelVariant::dense)
    throw std::invalid_argument("Stormer-Verlet requires separability (use a separable model)");

  const auto t_start = std::chrono::steady_clock::now();
  TrainResult result{std::move(initial), {}, 0};
  ScalarFieldModel work = result.model;
  Eigen::MatrixXd y0_hat(data.dim(), data.trajectories());
  for (int k = 0; k < data.trajectories(); ++k) y0_hat.col(k) = data.noisy[static_cast<std::size_t>(k)].point(0);
  const MirkTableau* mirk = nullptr;
  if (method.kind == MethodKind::mii) mirk = &*find_tableau(method.integrator).mirk;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t_epoch = std::chrono::steady_clock::now();
    const bool pretrain = epoch <= config.pretrain_epochs;
    const MethodKind kind = pretrain ? MethodKind::one_step : method.kind;
    if (kind == MethodKind::iso)
      y0_hat = optimize_initial_states(result.model, data, method.integrator, y0_hat, config.iso);

    auto objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
      work.set_parameters(theta);
      LossResult r;
      switch (kind) {
        case MethodKind::one_step: r = one_step_loss(work, data, method.integrator); break;
        case MethodKind::mii: r = mii_loss(work, data, *mirk); break;
        case MethodKind::iso: r = iso_rollout_loss(work, data, method.integrator, y0_hat); break;
      }
      grad = r.gradient;
      return r.value;
    };
    OptimResult opt = config.optimizer == "adam"
                          ? adam_minimize(objective, result.model.parameters(), config.adam)
                          : lbfgs_minimize(objective, result.model.parameters(), config.lbfgs);
    if (!std::isfinite(opt.f_initial) || !std::isfinite(opt.f))
      throw std::runtime_error("train: non-finite loss in epoch " + std::to_string(epoch) + " (" +
                               method.label() + ", stop: " + opt.stop_reason + ")");
    result.model.set_parameters(opt.x);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = pretrain ? "pretrain" : "method";
    rec.loss_kind = kind == MethodKind::one_step ? "one_step" : kind == MethodKind::mii ? "mii" : "iso";
    rec.loss_before = opt.f_initial;
    rec.loss = opt.f;
    rec.iterations = opt.iterations;
    rec.stop_reason = opt.stop_reason;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch).count();
    result.history.push_back(rec);
  }
  result.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

FlowErrorReport flow_error(const VectorField& learned, const HamiltonianSystem& sys,
                           const std::vector<Eigen::VectorXd>& test_points, double h) {
  FlowErrorReport rep;
  rep.M = static_cast<int>(test_points.size());
  for (const auto& y : test_points) {
    const Eigen::VectorXd pred = reference_solve(learned, y, h, 1).point(1);
    const Eigen::VectorXd truth = reference_solve(sys, y, h, 1).point(1);
    rep.errors.push_back((pred - truth).norm());
  }
  double sum = 0;
  for (double e : rep.errors) sum += e;
  rep.e = rep.M > 0 ? sum / rep.M : 0.0;
  return rep;
}

}  // namespace mii
