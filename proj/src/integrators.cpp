#include "mii/integrators.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace mii {

namespace {

double inf_norm(const Eigen::VectorXd& x) { return x.size() ? x.cwiseAbs().maxCoeff() : 0.0; }

bool all_finite(const Eigen::VectorXd& x) { return x.allFinite(); }

// Stage derivatives K (s blocks of n) for an implicit tableau.
std::optional<Eigen::VectorXd> solve_stages_newton(const Tableau& t, const VectorField& f,
                                                   const Eigen::VectorXd& y, double h,
                                                   const IvpSolveSettings& st, double& residual,
                                                   int& iterations) {
  const int s = t.stages();
  const auto n = y.size();
  const Eigen::VectorXd f0 = f(y);
  Eigen::VectorXd K(s * n);
  for (int i = 0; i < s; ++i) K.segment(i * n, n) = f0;

  Eigen::MatrixXd M(s * n, s * n);
  Eigen::VectorXd R(s * n);
  for (iterations = 1; iterations <= st.max_iterations; ++iterations) {
    M.setIdentity();
    for (int i = 0; i < s; ++i) {
      Eigen::VectorXd Yi = y;
      for (int j = 0; j < s; ++j)
        if (t.A(i, j) != 0.0) Yi += h * t.A(i, j) * K.segment(j * n, n);
      R.segment(i * n, n) = K.segment(i * n, n) - f(Yi);
      const Eigen::MatrixXd Ji = f.jacobian(Yi);
      for (int j = 0; j < s; ++j)
        if (t.A(i, j) != 0.0) M.block(i * n, j * n, n, n) -= h * t.A(i, j) * Ji;
    }
    const Eigen::VectorXd delta = M.partialPivLu().solve(-R);
    K += delta;
    residual = inf_norm(R);
    if (!all_finite(K)) return std::nullopt;
    if (inf_norm(delta) <= st.tolerance * std::max(1.0, inf_norm(K))) return K;
  }
  return std::nullopt;
}

std::optional<Eigen::VectorXd> solve_stages_fixed_point(const Tableau& t, const VectorField& f,
                                                        const Eigen::VectorXd& y, double h,
                                                        const IvpSolveSettings& st,
                                                        double& residual, int& iterations) {
  const int s = t.stages();
  const auto n = y.size();
  const Eigen::VectorXd f0 = f(y);
  Eigen::VectorXd K(s * n);
  for (int i = 0; i < s; ++i) K.segment(i * n, n) = f0;
  for (iterations = 1; iterations <= st.max_iterations * 4; ++iterations) {
    Eigen::VectorXd Kn(s * n);
    for (int i = 0; i < s; ++i) {
      Eigen::VectorXd Yi = y;
      for (int j = 0; j < s; ++j)
        if (t.A(i, j) != 0.0) Yi += h * t.A(i, j) * K.segment(j * n, n);
      Kn.segment(i * n, n) = f(Yi);
    }
    residual = inf_norm(Kn - K);
    K = Kn;
    if (!all_finite(K)) return std::nullopt;
    if (residual <= st.tolerance * std::max(1.0, inf_norm(K))) return K;
  }
  return std::nullopt;
}

// Newton-like iteration x <- x - J(x)^{-1} R(x) with a user-supplied approximate Jacobian.
Eigen::VectorXd newton_solve(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
                             const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jacobian,
                             Eigen::VectorXd x, const IvpSolveSettings& st, const char* who,
                             int polish = 0) {
  double res = std::numeric_limits<double>::infinity();
  const int max_it = st.kind == SolverKind::newton ? st.max_iterations : st.max_iterations * 4;
  for (int it = 1; it <= max_it; ++it) {
    const Eigen::VectorXd R = residual(x);
    res = inf_norm(R);
    Eigen::VectorXd delta;
    if (st.kind == SolverKind::newton)
      delta = jacobian(x).partialPivLu().solve(-R);
    else
      delta = -R;
    x += delta;
    if (!all_finite(x)) throw SolverError(std::string(who) + ": iteration diverged", res, it);
    if (inf_norm(delta) <= st.tolerance * std::max(1.0, inf_norm(x))) {
      for (int k = 0; k < polish; ++k) {
        if (st.kind == SolverKind::newton)
          x -= jacobian(x).partialPivLu().solve(residual(x));
        else
          x -= residual(x);
      }
      return x;
    }
  }
  throw SolverError(std::string(who) + ": no convergence (residual " + std::to_string(res) + ")",
                    res, max_it);
}

}  // namespace

Eigen::VectorXd rk_step(const Tableau& t, const VectorField& f, const Eigen::VectorXd& y, double h,
                        const IvpSolveSettings& settings) {
  const int s = t.stages();
  const auto n = y.size();
  if (t.is_explicit()) {
    std::vector<Eigen::VectorXd> k(static_cast<std::size_t>(s));
    Eigen::VectorXd out = y;
    for (int i = 0; i < s; ++i) {
      Eigen::VectorXd Yi = y;
      for (int j = 0; j < i; ++j)
        if (t.A(i, j) != 0.0) Yi += h * t.A(i, j) * k[static_cast<std::size_t>(j)];
      k[static_cast<std::size_t>(i)] = f(Yi);
      out += h * t.b(i) * k[static_cast<std::size_t>(i)];
    }
    return out;
  }

  double residual = 0;
  int iterations = 0;
  std::optional<Eigen::VectorXd> K;
  if (settings.kind == SolverKind::newton)
    K = solve_stages_newton(t, f, y, h, settings, residual, iterations);
  if (!K) K = solve_stages_fixed_point(t, f, y, h, settings, residual, iterations);
  if (!K)
    throw SolverError("rk_step(" + t.name + "): nonlinear solve did not converge, residual " +
                          std::to_string(residual),
                      residual, iterations);
  Eigen::VectorXd out = y;
  for (int i = 0; i < s; ++i) out += h * t.b(i) * K->segment(i * n, n);
  return out;
}

Eigen::VectorXd mirk_increment(const MirkTableau& m, const VectorField& f,
                               const Eigen::VectorXd& y_n, const Eigen::VectorXd& y_np1, double h) {
  const int s = m.stages();
  std::vector<Eigen::VectorXd> k(static_cast<std::size_t>(s));
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(y_n.size());
  for (int i = 0; i < s; ++i) {
    Eigen::VectorXd Yi = (1.0 - m.v(i)) * y_n + m.v(i) * y_np1;
    for (int j = 0; j < i; ++j)
      if (m.D(i, j) != 0.0) Yi += h * m.D(i, j) * k[static_cast<std::size_t>(j)];
    k[static_cast<std::size_t>(i)] = f(Yi);
    psi += m.b(i) * k[static_cast<std::size_t>(i)];
  }
  return psi;
}

Eigen::VectorXd inverse_explicit_step(const MirkTableau& m, const VectorField& f,
                                      const Eigen::VectorXd& y_n, const Eigen::VectorXd& y_np1,
                                      double h) {
  return y_n + h * mirk_increment(m, f, y_n, y_np1, h);
}

int endpoint_stage_kind(const MirkTableau& m, int stage) {
  if (!m.D.row(stage).isZero(0.0)) return -1;
  if (m.v(stage) == 0.0) return 0;
  if (m.v(stage) == 1.0) return 1;
  return -1;
}

Eigen::MatrixXd mirk_trajectory_increments(const MirkTableau& m, const VectorField& f,
                                           const Eigen::MatrixXd& points, double h,
                                           bool share_endpoint_stages) {
  const auto npts = points.rows();
  if (npts < 2) throw std::invalid_argument("mirk_trajectory_increments: need at least two points");
  const int s = m.stages();
  std::vector<std::optional<Eigen::VectorXd>> cache(static_cast<std::size_t>(npts));
  auto at_point = [&](Eigen::Index idx) -> const Eigen::VectorXd& {
    auto& slot = cache[static_cast<std::size_t>(idx)];
    if (!slot) slot = f(points.row(idx).transpose());
    return *slot;
  };

  Eigen::MatrixXd psi(npts - 1, points.cols());
  std::vector<Eigen::VectorXd> k(static_cast<std::size_t>(s));
  for (Eigen::Index n = 0; n + 1 < npts; ++n) {
    const Eigen::VectorXd y0 = points.row(n).transpose();
    const Eigen::VectorXd y1 = points.row(n + 1).transpose();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(points.cols());
    for (int i = 0; i < s; ++i) {
      const int kind = share_endpoint_stages ? endpoint_stage_kind(m, i) : -1;
      if (kind >= 0) {
        k[static_cast<std::size_t>(i)] = at_point(n + kind);
      } else {
        Eigen::VectorXd Yi = (1.0 - m.v(i)) * y0 + m.v(i) * y1;
        for (int j = 0; j < i; ++j)
          if (m.D(i, j) != 0.0) Yi += h * m.D(i, j) * k[static_cast<std::size_t>(j)];
        k[static_cast<std::size_t>(i)] = f(Yi);
      }
      acc += m.b(i) * k[static_cast<std::size_t>(i)];
    }
    psi.row(n) = acc.transpose();
  }
  return psi;
}

Eigen::VectorXd stormer_verlet_step(const VectorField& f, const Eigen::VectorXd& y, double h) {
  const auto d = y.size() / 2;
  Eigen::VectorXd z = y;
  z.tail(d) += 0.5 * h * f(z).tail(d);
  z.head(d) += h * f(z).head(d);
  z.tail(d) += 0.5 * h * f(z).tail(d);
  return z;
}

Eigen::VectorXd stormer_verlet_step(const HamiltonianSystem& sys, const Eigen::VectorXd& y, double h) {
  if (!sys.separable)
    throw std::invalid_argument("Stormer-Verlet requires separability (system '" + sys.name + "')");
  return stormer_verlet_step(hamiltonian_field(sys), y, h);
}

namespace {

// f + h^2/12 (-f'f'f + 1/2 f''(f, f)) at z.
Eigen::VectorXd edrk4_modified_field(const HamiltonianSystem& sys, const Eigen::VectorXd& z, double h) {
  const Eigen::VectorXd fz = sys.field(z);
  const Eigen::MatrixXd Jf = sys.jacobian(z);
  Eigen::VectorXd corr = -Jf * (Jf * fz);
  const double nf = fz.norm();
  if (nf > 0) {
    constexpr double eps = 1e-5;
    const Eigen::VectorXd u = fz / nf;
    const Eigen::MatrixXd dH = (sys.hessian(z + eps * u) - sys.hessian(z - eps * u)) * (nf / (2 * eps));
    corr += 0.5 * apply_J(Eigen::VectorXd(dH * fz));
  }
  return fz + (h * h / 12.0) * corr;
}

}  // namespace

Eigen::VectorXd edrk4_step(const HamiltonianSystem& sys, const Eigen::VectorXd& y, double h,
                           const IvpSolveSettings& settings) {
  auto residual = [&](const Eigen::VectorXd& y1) -> Eigen::VectorXd {
    return y1 - y - h * edrk4_modified_field(sys, 0.5 * (y + y1), h);
  };
  auto jac = [&](const Eigen::VectorXd& y1) -> Eigen::MatrixXd {
    return Eigen::MatrixXd::Identity(y.size(), y.size()) - 0.5 * h * sys.jacobian(0.5 * (y + y1));
  };
  return newton_solve(residual, jac, y + h * sys.field(y), settings, "edrk4_step", 1);
}

Eigen::VectorXd discrete_gradient(const HamiltonianSystem& sys, const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& v) {
  const Eigen::VectorXd w = v - u;
  const double ww = w.squaredNorm();
  if (std::sqrt(ww) <= 1e-14) return sys.grad(u);
  const Eigen::VectorXd g = sys.grad(0.5 * (u + v));
  return g + ((sys.H(v) - sys.H(u) - g.dot(w)) / ww) * w;
}

Eigen::MatrixXd discrete_gradient_q(const HamiltonianSystem& sys, const Eigen::VectorXd& u,
                                    const Eigen::VectorXd& v) {
  // D2 dg = Hess(m)/2 + c I + w (dc/dv)^T; only the last term has a skew part.
  const Eigen::VectorXd w = v - u;
  const double ww = w.squaredNorm();
  if (std::sqrt(ww) <= 1e-10) return Eigen::MatrixXd::Zero(u.size(), u.size());
  const Eigen::VectorXd mid = 0.5 * (u + v);
  const Eigen::VectorXd g = sys.grad(mid);
  const Eigen::MatrixXd Hm = sys.hessian(mid);
  const double num = sys.H(v) - sys.H(u) - g.dot(w);
  const Eigen::VectorXd dc = (sys.grad(v) - g - 0.5 * (Hm * w)) / ww - (2 * num / (ww * ww)) * w;
  return 0.5 * (dc * w.transpose() - w * dc.transpose());
}

Eigen::VectorXd dg_step(const HamiltonianSystem& sys, const Eigen::MatrixXd& S,
                        const Eigen::VectorXd& y, double h, int order,
                        const IvpSolveSettings& settings) {
  if (order != 2 && order != 4) throw std::invalid_argument("dg_step: order must be 2 or 4");
  auto s_bar = [&](const Eigen::VectorXd& y1) -> Eigen::MatrixXd {
    if (order == 2) return S;
    const Eigen::VectorXd ybar = 0.5 * (y + y1);
    const Eigen::MatrixXd Q = discrete_gradient_q(sys, y, y / 3 + 2 * y1 / 3) -
                              discrete_gradient_q(sys, y1, 2 * y / 3 + y1 / 3);
    const Eigen::MatrixXd Hm = sys.hessian(ybar);
    Eigen::MatrixXd M = S + 0.5 * h * S * Q * S - (h * h / 12.0) * S * Hm * S * Hm * S;
    return 0.5 * (M - M.transpose());
  };
  auto residual = [&](const Eigen::VectorXd& y1) -> Eigen::VectorXd {
    return y1 - y - h * s_bar(y1) * discrete_gradient(sys, y, y1);
  };
  auto jac = [&](const Eigen::VectorXd& y1) -> Eigen::MatrixXd {
    return Eigen::MatrixXd::Identity(y.size(), y.size()) - 0.5 * h * S * sys.hessian(0.5 * (y + y1));
  };
  return newton_solve(residual, jac, y + h * S * sys.grad(y), settings, "dg_step", 2);
}

Trajectory reference_solve(const VectorField& f, const Eigen::VectorXd& y0, double h_out, int N,
                           const ReferenceSettings& settings) {
  if (N < 0) throw std::invalid_argument("reference_solve: N must be >= 0");
  const Tableau& gl6 = find_tableau("gl6").rk;
  const int sub = std::max(1, static_cast<int>(std::ceil(std::abs(h_out) / settings.max_internal_step - 1e-9)));
  const double h_int = h_out / sub;
  if (h_out != 0 && std::abs(h_int) < 1e-300) throw std::runtime_error("reference_solve: step-size underflow");
  Trajectory tr;
  tr.h = h_out;
  tr.points.resize(N + 1, y0.size());
  tr.points.row(0) = y0.transpose();
  Eigen::VectorXd y = y0;
  for (int n = 1; n <= N; ++n) {
    for (int k = 0; k < sub; ++k) y = rk_step(gl6, f, y, h_int, settings.newton);
    tr.points.row(n) = y.transpose();
  }
  return tr;
}

Trajectory reference_solve(const HamiltonianSystem& sys, const Eigen::VectorXd& y0, double h_out,
                           int N, const ReferenceSettings& settings) {
  return reference_solve(hamiltonian_field(sys), y0, h_out, N, settings);
}

std::vector<std::string> stepper_names() {
  std::vector<std::string> out;
  for (const auto& e : builtin_tableaus()) out.push_back(e.key);
  out.insert(out.end(), {"stormer_verlet", "edrk4", "dg2", "dg4"});
  return out;
}

Stepper make_stepper(const std::string& name, const HamiltonianSystem& sys,
                     const IvpSolveSettings& settings) {
  if (name == "stormer_verlet" || name == "sv") {
    if (!sys.separable)
      throw std::invalid_argument("Stormer-Verlet requires separability (system '" + sys.name + "')");
    const VectorField f = hamiltonian_field(sys);
    return [f](const Eigen::VectorXd& y, double h) { return stormer_verlet_step(f, y, h); };
  }
  if (name == "edrk4")
    return [sys, settings](const Eigen::VectorXd& y, double h) { return edrk4_step(sys, y, h, settings); };
  if (name == "dg2" || name == "dg4") {
    const int order = name == "dg2" ? 2 : 4;
    const Eigen::MatrixXd S = canonical_J(sys.d);
    return [sys, S, order, settings](const Eigen::VectorXd& y, double h) {
      return dg_step(sys, S, y, h, order, settings);
    };
  }
  const Tableau t = find_tableau(name).rk;
  const VectorField f = hamiltonian_field(sys);
  return [t, f, settings](const Eigen::VectorXd& y, double h) { return rk_step(t, f, y, h, settings); };
}

Trajectory integrate(const Stepper& stepper, const Eigen::VectorXd& y0, double h, int steps) {
  Trajectory tr;
  tr.h = h;
  tr.points.resize(steps + 1, y0.size());
  tr.points.row(0) = y0.transpose();
  Eigen::VectorXd y = y0;
  for (int n = 1; n <= steps; ++n) {
    y = stepper(y, h);
    tr.points.row(n) = y.transpose();
  }
  return tr;
}

double loglog_slope(const std::vector<double>& h, const std::vector<double>& values) {
  if (h.size() != values.size() || h.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 points");
  const auto n = static_cast<double>(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]), yv = std::log(values[i]);
    sx += x;
    sy += yv;
    sxx += x * x;
    sxy += x * yv;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

OrderFit empirical_order(const Stepper& stepper, const HamiltonianSystem& sys,
                         const Eigen::VectorXd& y0, const std::vector<double>& h_list, double floor) {
  OrderFit fit;
  std::vector<double> hs, es;
  for (double h : h_list) {
    const Eigen::VectorXd ref = reference_solve(sys, y0, h, 1).point(1);
    const double err = (stepper(y0, h) - ref).norm();
    fit.h.push_back(h);
    fit.errors.push_back(err);
    if (err >= floor) {
      hs.push_back(h);
      es.push_back(err);
    }
  }
  fit.used_points = static_cast<int>(hs.size());
  if (hs.size() < 3)
    throw std::runtime_error("empirical_order: fewer than 3 errors above the round-off floor");
  fit.order = loglog_slope(hs, es) - 1.0;
  return fit;
}

}  // namespace mii
