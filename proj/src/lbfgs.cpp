#include "mii/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace mii {

namespace {

double cubic_interpolate(double x1, double f1, double g1, double x2, double f2, double g2, double lo, double hi) {
  const double d1 = g1 + g2 - 3 * (f1 - f2) / (x1 - x2);
  const double d2sq = d1 * d1 - g1 * g2;
  double t = 0.5 * (lo + hi);
  if (d2sq >= 0 && std::isfinite(d2sq)) {
    const double d2 = std::sqrt(d2sq);
    const double pos = x1 <= x2 ? x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2 * d2))
                                : x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2 * d2));
    if (std::isfinite(pos)) t = std::min(std::max(pos, lo), hi);
  }
  return t;
}

struct Point {
  double t = 0, f = 0, gtd = 0;
  Eigen::VectorXd g;
};

struct LineSearchResult {
  Point p;
  int evaluations = 0;
};

LineSearchResult strong_wolfe(const Objective& fn, const Eigen::VectorXd& x, double t, const Eigen::VectorXd& d,
                              const Point& start, const LbfgsSettings& st) {
  const double d_norm = d.cwiseAbs().maxCoeff();
  auto eval = [&](double step) {
    Point p;
    p.t = step;
    p.g = Eigen::VectorXd(x.size());
    p.f = fn(x + step * d, p.g);
    if (!std::isfinite(p.f) || !p.g.allFinite()) {
      p.f = std::numeric_limits<double>::infinity();
      p.g.setZero();
    }
    p.gtd = p.g.dot(d);
    return p;
  };
  LineSearchResult r;
  Point cur = eval(t);
  r.evaluations = 1;
  Point prev = start;
  prev.t = 0;

  std::vector<Point> bracket;
  bool done = false;
  int ls = 0;
  while (ls < st.max_line_search) {
    if (cur.f > start.f + st.c1 * cur.t * start.gtd || (ls > 1 && cur.f >= prev.f)) {
      bracket = {prev, cur};
      break;
    }
    if (std::abs(cur.gtd) <= -st.c2 * start.gtd) {
      bracket = {cur};
      done = true;
      break;
    }
    if (cur.gtd >= 0) {
      bracket = {prev, cur};
      break;
    }
    const double lo = cur.t + 0.01 * (cur.t - prev.t), hi = cur.t * 10;
    const double next = cubic_interpolate(prev.t, prev.f, prev.gtd, cur.t, cur.f, cur.gtd, lo, hi);
    prev = cur;
    cur = eval(next);
    ++r.evaluations;
    ++ls;
  }
  if (ls == st.max_line_search) {
    bracket = {start, cur};
    bracket[0].t = 0;
  }

  if (bracket.size() == 1) {
    r.p = bracket[0];
    return r;
  }
  bool insufficient = false;
  int low = bracket[0].f <= bracket[1].f ? 0 : 1;
  int high = 1 - low;
  while (!done && ls < st.max_line_search) {
    if (std::abs(bracket[1].t - bracket[0].t) * d_norm < st.change_tolerance) break;
    const double bmin = std::min(bracket[0].t, bracket[1].t), bmax = std::max(bracket[0].t, bracket[1].t);
    double step = cubic_interpolate(bracket[0].t, bracket[0].f, bracket[0].gtd, bracket[1].t, bracket[1].f,
                                    bracket[1].gtd, bmin, bmax);
    const double eps = 0.1 * (bmax - bmin);
    if (std::min(bmax - step, step - bmin) < eps) {
      if (insufficient || step >= bmax || step <= bmin) {
        step = std::abs(step - bmax) < std::abs(step - bmin) ? bmax - eps : bmin + eps;
        insufficient = false;
      } else {
        insufficient = true;
      }
    } else {
      insufficient = false;
    }
    Point p = eval(step);
    ++r.evaluations;
    ++ls;
    if (p.f > start.f + st.c1 * p.t * start.gtd || p.f >= bracket[low].f) {
      bracket[high] = p;
    } else {
      if (std::abs(p.gtd) <= -st.c2 * start.gtd)
        done = true;
      else if (p.gtd * (bracket[high].t - bracket[low].t) >= 0)
        bracket[high] = bracket[low];
      bracket[low] = p;
    }
    low = bracket[0].f <= bracket[1].f ? 0 : 1;
    high = 1 - low;
  }
  r.p = bracket[low];
  return r;
}

}  // namespace

OptimResult lbfgs_minimize(const Objective& fn, Eigen::VectorXd x0, const LbfgsSettings& st) {
  const int max_evals = st.max_evaluations > 0 ? st.max_evaluations : st.max_iterations * 5 / 4;
  OptimResult res;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd g(x.size());
  double f = fn(x, g);
  res.evaluations = 1;
  res.f_initial = f;
  res.x = x;
  res.f = f;
  if (!std::isfinite(f)) {
    res.stop_reason = "non-finite objective at start";
    return res;
  }
  if (g.size() == 0 || g.cwiseAbs().maxCoeff() <= st.grad_tolerance) {
    res.stop_reason = "gradient tolerance";
    return res;
  }

  std::deque<Eigen::VectorXd> S, Y;
  std::deque<double> rho;
  double h_diag = 1.0;
  Eigen::VectorXd d, g_prev;
  double t = 0;
  for (int it = 1; it <= st.max_iterations; ++it) {
    res.iterations = it;
    if (it == 1) {
      d = -g;
      h_diag = 1.0;
    } else {
      const Eigen::VectorXd y = g - g_prev;
      const Eigen::VectorXd s = t * d;
      const double ys = y.dot(s);
      if (ys > 1e-10) {
        if (static_cast<int>(S.size()) == st.history) {
          S.pop_front();
          Y.pop_front();
          rho.pop_front();
        }
        S.push_back(s);
        Y.push_back(y);
        rho.push_back(1.0 / ys);
        h_diag = ys / y.dot(y);
      }
      Eigen::VectorXd q = -g;
      std::vector<double> alpha(S.size());
      for (auto k = static_cast<std::ptrdiff_t>(S.size()) - 1; k >= 0; --k) {
        const auto i = static_cast<std::size_t>(k);
        alpha[i] = rho[i] * S[i].dot(q);
        q -= alpha[i] * Y[i];
      }
      d = h_diag * q;
      for (std::size_t i = 0; i < S.size(); ++i) {
        const double beta = rho[i] * Y[i].dot(d);
        d += (alpha[i] - beta) * S[i];
      }
    }
    g_prev = g;
    const double f_prev = f;
    t = it == 1 ? std::min(1.0, 1.0 / g.cwiseAbs().sum()) : 1.0;
    const double gtd = g.dot(d);
    if (gtd > -st.change_tolerance) {
      res.stop_reason = "directional derivative below tolerance";
      break;
    }
    Point start{0.0, f, gtd, g};
    const auto ls = strong_wolfe(fn, x, t, d, start, st);
    res.evaluations += ls.evaluations;
    if (!std::isfinite(ls.p.f) || ls.p.f > f) {
      res.stop_reason = "line search failed";
      break;
    }
    t = ls.p.t;
    x += t * d;
    f = ls.p.f;
    g = ls.p.g;
    if (f < res.f) {
      res.f = f;
      res.x = x;
    }
    if (res.evaluations >= max_evals) {
      res.stop_reason = "evaluation budget";
      break;
    }
    if (g.cwiseAbs().maxCoeff() <= st.grad_tolerance) {
      res.stop_reason = "gradient tolerance";
      break;
    }
    if ((t * d).cwiseAbs().maxCoeff() <= st.change_tolerance) {
      res.stop_reason = "parameter change tolerance";
      break;
    }
    if (std::abs(f - f_prev) < st.change_tolerance) {
      res.stop_reason = "loss change tolerance";
      break;
    }
  }
  if (res.stop_reason.empty()) res.stop_reason = "iteration budget";
  return res;
}

OptimResult adam_minimize(const Objective& fn, Eigen::VectorXd x0, const AdamSettings& st) {
  OptimResult res;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size()), v = Eigen::VectorXd::Zero(x.size());
  res.x = x;
  res.f = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= st.iterations; ++it) {
    const double f = fn(x, g);
    ++res.evaluations;
    if (it == 1) res.f_initial = f;
    if (!std::isfinite(f)) {
      res.stop_reason = "non-finite objective";
      return res;
    }
    if (f < res.f) {
      res.f = f;
      res.x = x;
    }
    m = st.beta1 * m + (1 - st.beta1) * g;
    v = st.beta2 * v + (1 - st.beta2) * g.cwiseAbs2();
    const double c1 = 1 - std::pow(st.beta1, it), c2 = 1 - std::pow(st.beta2, it);
    x -= st.learning_rate * ((m / c1).array() / ((v / c2).array().sqrt() + st.epsilon)).matrix();
    res.iterations = it;
  }
  Eigen::VectorXd gl(x.size());
  const double f = fn(x, gl);
  ++res.evaluations;
  if (std::isfinite(f) && f < res.f) {
    res.f = f;
    res.x = x;
  }
  res.stop_reason = "iteration budget";
  return res;
}

}  // namespace mii
