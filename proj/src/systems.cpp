#include "mii/systems.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace mii {

Eigen::MatrixXd canonical_J(int d) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  J.topRightCorner(d, d).setIdentity();
  J.bottomLeftCorner(d, d) = -Eigen::MatrixXd::Identity(d, d);
  return J;
}

Eigen::VectorXd apply_J(const Eigen::VectorXd& x) {
  const auto d = x.size() / 2;
  Eigen::VectorXd out(x.size());
  out.head(d) = x.tail(d);
  out.tail(d) = -x.head(d);
  return out;
}

Eigen::MatrixXd apply_J(const Eigen::MatrixXd& M) {
  const auto d = M.rows() / 2;
  Eigen::MatrixXd out(M.rows(), M.cols());
  out.topRows(d) = M.bottomRows(d);
  out.bottomRows(d) = -M.topRows(d);
  return out;
}

Eigen::VectorXd HamiltonianSystem::field(const Eigen::VectorXd& y) const { return apply_J(grad(y)); }

Eigen::MatrixXd HamiltonianSystem::hessian(const Eigen::VectorXd& y) const {
  if (hess) return hess(y);
  const auto n = y.size();
  Eigen::MatrixXd Hm(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double step = 1e-6 * std::max(1.0, std::abs(y(j)));
    Eigen::VectorXd yp = y, ym = y;
    yp(j) += step;
    ym(j) -= step;
    Hm.col(j) = (grad(yp) - grad(ym)) / (2 * step);
  }
  return 0.5 * (Hm + Hm.transpose());
}

Eigen::MatrixXd HamiltonianSystem::jacobian(const Eigen::VectorXd& y) const {
  return apply_J(hessian(y));
}

HamiltonianSystem fput(int m, double omega) {
  if (m < 1) throw std::invalid_argument("fput: m must be >= 1");
  const int n = 2 * m;  // length of q
  // Quartic terms are (l_k . q)^4 / 4 for the linear forms below (1-based in the
  // textbook formula: q_{i+1} - q_{i+m+1} - q_i - q_{i+m}, q_1 - q_{m+1}, q_m + q_{2m}).
  std::vector<Eigen::VectorXd> forms;
  for (int i = 0; i + 1 < m; ++i) {
    Eigen::VectorXd l = Eigen::VectorXd::Zero(n);
    l(i + 1) += 1;
    l(i + m + 1) -= 1;
    l(i) -= 1;
    l(i + m) -= 1;
    forms.push_back(l);
  }
  {
    Eigen::VectorXd l = Eigen::VectorXd::Zero(n);
    l(0) += 1;
    l(m) -= 1;
    forms.push_back(l);
  }
  {
    Eigen::VectorXd l = Eigen::VectorXd::Zero(n);
    l(m - 1) += 1;
    l(2 * m - 1) += 1;
    forms.push_back(l);
  }
  const double w2 = omega * omega;

  HamiltonianSystem s;
  s.name = "fput";
  s.d = n;
  s.separable = true;
  s.params = {{"m", m}, {"omega", omega}};
  s.H = [=](const Eigen::VectorXd& y) {
    const auto q = y.head(n);
    const auto p = y.tail(n);
    double h = 0.5 * p.squaredNorm() + 0.5 * w2 * q.tail(m).squaredNorm();
    for (const auto& l : forms) h += 0.25 * std::pow(l.dot(q), 4);
    return h;
  };
  s.grad = [=](const Eigen::VectorXd& y) {
    const Eigen::VectorXd q = y.head(n);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(2 * n);
    g.segment(m, m) = w2 * q.tail(m);
    for (const auto& l : forms) g.head(n) += std::pow(l.dot(q), 3) * l;
    g.tail(n) = y.tail(n);
    return g;
  };
  s.hess = [=](const Eigen::VectorXd& y) {
    const Eigen::VectorXd q = y.head(n);
    Eigen::MatrixXd Hm = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    Hm.block(m, m, m, m).diagonal().setConstant(w2);
    for (const auto& l : forms) {
      const double z = l.dot(q);
      Hm.topLeftCorner(n, n) += 3 * z * z * l * l.transpose();
    }
    Hm.bottomRightCorner(n, n).setIdentity();
    return Hm;
  };
  return s;
}

HamiltonianSystem double_pendulum() {
  struct Parts {
    double g, g1, g2;   // 1/(1+sin^2), first and second derivative in Delta
    double N, Nd, Ndd;  // kinetic numerator and its Delta-derivatives
    double Np1, Np2;
    double sd, cd;
  };
  auto parts = [](const Eigen::VectorXd& y) {
    Parts r{};
    const double dl = y(0) - y(1);
    const double p1 = y(2), p2 = y(3);
    r.sd = std::sin(dl);
    r.cd = std::cos(dl);
    const double Dn = 1 + r.sd * r.sd;
    const double s2 = std::sin(2 * dl), c2 = std::cos(2 * dl);
    r.g = 1 / Dn;
    r.g1 = -s2 / (Dn * Dn);
    r.g2 = (2 * s2 * s2 - 2 * c2 * Dn) / (Dn * Dn * Dn);
    r.N = 0.5 * p1 * p1 + p2 * p2 - p1 * p2 * r.cd;
    r.Nd = p1 * p2 * r.sd;
    r.Ndd = p1 * p2 * r.cd;
    r.Np1 = p1 - p2 * r.cd;
    r.Np2 = 2 * p2 - p1 * r.cd;
    return r;
  };

  HamiltonianSystem s;
  s.name = "double_pendulum";
  s.d = 2;
  s.separable = false;
  s.H = [](const Eigen::VectorXd& y) {
    const double dl = y(0) - y(1);
    const double sd = std::sin(dl);
    const double N = 0.5 * y(2) * y(2) + y(3) * y(3) - y(2) * y(3) * std::cos(dl);
    return N / (1 + sd * sd) - 2 * std::cos(y(0)) - std::cos(y(1));
  };
  s.grad = [parts](const Eigen::VectorXd& y) {
    const Parts r = parts(y);
    const double Td = r.Nd * r.g + r.N * r.g1;
    Eigen::VectorXd g(4);
    g << Td + 2 * std::sin(y(0)), -Td + std::sin(y(1)), r.Np1 * r.g, r.Np2 * r.g;
    return g;
  };
  s.hess = [parts](const Eigen::VectorXd& y) {
    const Parts r = parts(y);
    const double p1 = y(2), p2 = y(3);
    const double Tdd = r.Ndd * r.g + 2 * r.Nd * r.g1 + r.N * r.g2;
    const double Tdp1 = p2 * r.sd * r.g + r.Np1 * r.g1;
    const double Tdp2 = p1 * r.sd * r.g + r.Np2 * r.g1;
    Eigen::MatrixXd Hm(4, 4);
    Hm << Tdd + 2 * std::cos(y(0)), -Tdd, Tdp1, Tdp2,
        -Tdd, Tdd + std::cos(y(1)), -Tdp1, -Tdp2,
        Tdp1, -Tdp1, r.g, -r.cd * r.g,
        Tdp2, -Tdp2, -r.cd * r.g, 2 * r.g;
    return Hm;
  };
  return s;
}

HamiltonianSystem henon_heiles() {
  HamiltonianSystem s;
  s.name = "henon_heiles";
  s.d = 2;
  s.separable = true;
  s.H = [](const Eigen::VectorXd& y) {
    const double q1 = y(0), q2 = y(1);
    return 0.5 * (y(2) * y(2) + y(3) * y(3)) + 0.5 * (q1 * q1 + q2 * q2) + q1 * q1 * q2 -
           q2 * q2 * q2 / 3;
  };
  s.grad = [](const Eigen::VectorXd& y) {
    const double q1 = y(0), q2 = y(1);
    Eigen::VectorXd g(4);
    g << q1 + 2 * q1 * q2, q2 + q1 * q1 - q2 * q2, y(2), y(3);
    return g;
  };
  s.hess = [](const Eigen::VectorXd& y) {
    const double q1 = y(0), q2 = y(1);
    Eigen::MatrixXd Hm = Eigen::MatrixXd::Zero(4, 4);
    Hm(0, 0) = 1 + 2 * q2;
    Hm(0, 1) = Hm(1, 0) = 2 * q1;
    Hm(1, 1) = 1 - 2 * q2;
    Hm(2, 2) = Hm(3, 3) = 1;
    return Hm;
  };
  return s;
}

HamiltonianSystem quadratic_system(const Eigen::MatrixXd& S) {
  if (S.rows() != S.cols() || S.rows() % 2 != 0)
    throw std::invalid_argument("quadratic_system: S must be square of even size");
  const Eigen::MatrixXd Ss = 0.5 * (S + S.transpose());
  HamiltonianSystem s;
  s.name = "quadratic";
  s.d = static_cast<int>(S.rows() / 2);
  const auto d = s.d;
  s.separable = Ss.topRightCorner(d, d).isZero(0.0);
  s.H = [Ss](const Eigen::VectorXd& y) { return 0.5 * y.dot(Ss * y); };
  s.grad = [Ss](const Eigen::VectorXd& y) -> Eigen::VectorXd { return Ss * y; };
  s.hess = [Ss](const Eigen::VectorXd&) { return Ss; };
  return s;
}

HamiltonianSystem zero_system(int d) {
  if (d < 1) throw std::invalid_argument("zero_system: d must be >= 1");
  HamiltonianSystem s;
  s.name = "zero";
  s.d = d;
  s.separable = true;
  s.H = [](const Eigen::VectorXd&) { return 0.0; };
  s.grad = [](const Eigen::VectorXd& y) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(y.size()); };
  s.hess = [](const Eigen::VectorXd& y) -> Eigen::MatrixXd {
    return Eigen::MatrixXd::Zero(y.size(), y.size());
  };
  return s;
}

HamiltonianSystem system_by_name(const std::string& name) {
  if (name == "fput") return fput(1, 2.0);
  if (name == "double_pendulum") return double_pendulum();
  if (name == "henon_heiles") return henon_heiles();
  throw std::invalid_argument("unknown system '" + name +
                              "' (expected fput, double_pendulum or henon_heiles)");
}

}  // namespace mii
