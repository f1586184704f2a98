#include "mii/tableau.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mii {

namespace {

constexpr double kConsistencyTol = 1e-12;

bool strictly_lower(const Eigen::MatrixXd& M) {
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = i; j < M.cols(); ++j)
      if (M(i, j) != 0.0) return false;
  return true;
}

std::string lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    if (ch == ' ' || ch == '.' || ch == '-' || ch == '_') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

Eigen::MatrixXd permute(const Eigen::MatrixXd& A, const std::vector<int>& p) {
  const auto s = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixXd out(s, s);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j) out(i, j) = A(p[i], p[j]);
  return out;
}

Eigen::VectorXd permute(const Eigen::VectorXd& b, const std::vector<int>& p) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) out(static_cast<Eigen::Index>(i)) = b(p[i]);
  return out;
}

// All involutions of {0..s-1}, each given as the image array.
void enumerate_involutions(std::vector<int>& current, std::vector<bool>& used, int pos,
                           std::vector<std::vector<int>>& out) {
  const int s = static_cast<int>(current.size());
  while (pos < s && used[pos]) ++pos;
  if (pos == s) {
    out.push_back(current);
    return;
  }
  used[pos] = true;
  current[pos] = pos;
  enumerate_involutions(current, used, pos + 1, out);
  for (int j = pos + 1; j < s; ++j) {
    if (used[j]) continue;
    used[j] = true;
    current[pos] = j;
    current[j] = pos;
    enumerate_involutions(current, used, pos + 1, out);
    used[j] = false;
  }
  used[pos] = false;
}

}  // namespace

bool Tableau::is_explicit() const { return strictly_lower(A); }

Tableau make_tableau(std::string name, Eigen::MatrixXd A, Eigen::VectorXd b,
                     Eigen::VectorXd c, bool require_consistent) {
  const auto s = b.size();
  if (s < 1) throw std::invalid_argument("tableau needs at least one stage");
  if (A.rows() != s || A.cols() != s || c.size() != s)
    throw std::invalid_argument("tableau '" + name + "': inconsistent dimensions");
  if (require_consistent) {
    const double err = (A.rowwise().sum() - c).cwiseAbs().maxCoeff();
    if (err > kConsistencyTol)
      throw std::invalid_argument("tableau '" + name + "': c differs from row sums of A");
  }
  return Tableau{std::move(name), std::move(A), std::move(b), std::move(c)};
}

MirkTableau make_mirk(std::string name, Eigen::VectorXd b, Eigen::VectorXd v,
                      Eigen::MatrixXd D, Eigen::VectorXd c) {
  const auto s = b.size();
  if (s < 1) throw std::invalid_argument("MIRK tableau needs at least one stage");
  if (v.size() != s || c.size() != s || D.rows() != s || D.cols() != s)
    throw std::invalid_argument("MIRK tableau '" + name + "': inconsistent dimensions");
  if (!strictly_lower(D))
    throw std::invalid_argument("MIRK tableau '" + name + "': D must be strictly lower triangular");
  return MirkTableau{std::move(name), std::move(b), std::move(v), std::move(D), std::move(c)};
}

Tableau mirk_to_rk(const MirkTableau& m) {
  const auto s = m.b.size();
  if (m.v.size() != s || m.D.rows() != s || m.D.cols() != s || m.c.size() != s)
    throw std::invalid_argument("mirk_to_rk: dimension mismatch");
  Eigen::MatrixXd A = m.D + m.v * m.b.transpose();
  return Tableau{m.name, std::move(A), m.b, m.c};
}

std::optional<MirkTableau> as_mirk(const Tableau& t, double tol) {
  const auto s = t.b.size();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(s);
  for (Eigen::Index i = 0; i < s; ++i) {
    const auto tail = s - i;
    const Eigen::VectorXd bt = t.b.tail(tail);
    const Eigen::VectorXd at = t.A.row(i).tail(tail).transpose();
    const double bb = bt.squaredNorm();
    if (bb > 0) v(i) = at.dot(bt) / bb;
    if ((at - v(i) * bt).cwiseAbs().maxCoeff() > tol) return std::nullopt;
  }
  Eigen::MatrixXd D = t.A - v * t.b.transpose();
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = i; j < s; ++j) D(i, j) = 0.0;
  return MirkTableau{t.name, t.b, v, std::move(D), t.c};
}

bool is_inverse_explicit(const Tableau& t, double tol) {
  std::vector<int> p(static_cast<std::size_t>(t.stages()));
  std::iota(p.begin(), p.end(), 0);
  do {
    Tableau q{t.name, permute(t.A, p), permute(t.b, p), permute(t.c, p)};
    if (as_mirk(q, tol)) return true;
  } while (std::next_permutation(p.begin(), p.end()));
  return false;
}

const std::vector<CatalogEntry>& builtin_tableaus() {
  static const std::vector<CatalogEntry> catalog = [] {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    std::vector<CatalogEntry> out;
    auto add_rk = [&](std::string key, std::string display, MatrixXd A, VectorXd b) {
      VectorXd c = A.rowwise().sum();
      Tableau t = make_tableau(display, std::move(A), std::move(b), std::move(c));
      auto mirk = as_mirk(t);
      out.push_back({std::move(key), std::move(display), std::move(t), std::move(mirk)});
    };
    auto add_mirk = [&](std::string key, std::string display, VectorXd b, VectorXd v,
                        MatrixXd D, VectorXd c) {
      MirkTableau m = make_mirk(display, std::move(b), std::move(v), std::move(D), std::move(c));
      Tableau t = mirk_to_rk(m);
      (void)make_tableau(t.name, t.A, t.b, t.c);  // consistency check
      out.push_back({std::move(key), std::move(display), std::move(t), std::move(m)});
    };

    add_rk("explicit_euler", "E. Euler", MatrixXd::Zero(1, 1), VectorXd::Ones(1));
    add_mirk("implicit_euler", "I. Euler", VectorXd::Ones(1), VectorXd::Ones(1),
             MatrixXd::Zero(1, 1), VectorXd::Ones(1));
    {
      MatrixXd A = MatrixXd::Zero(4, 4);
      A(1, 0) = 0.5;
      A(2, 1) = 0.5;
      A(3, 2) = 1.0;
      VectorXd b(4);
      b << 1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6;
      add_rk("rk4", "RK4", A, b);
    }
    add_mirk("midpoint", "Midpoint", VectorXd::Ones(1), VectorXd::Constant(1, 0.5),
             MatrixXd::Zero(1, 1), VectorXd::Constant(1, 0.5));
    {
      // Stages ordered c = (1, 1/3); weights are the Radau IIA weights of those nodes.
      VectorXd b(2), v(2), c(2);
      b << 0.25, 0.75;
      v << 1.0, 5.0 / 9;
      c << 1.0, 1.0 / 3;
      MatrixXd D = MatrixXd::Zero(2, 2);
      D(1, 0) = -2.0 / 9;
      add_mirk("mirk3", "MIRK3", b, v, D, c);
    }
    {
      VectorXd b(3), v(3), c(3);
      b << 1.0 / 6, 1.0 / 6, 2.0 / 3;
      v << 0.0, 1.0, 0.5;
      c << 0.0, 1.0, 0.5;
      MatrixXd D = MatrixXd::Zero(3, 3);
      D(2, 0) = 1.0 / 8;
      D(2, 1) = -1.0 / 8;
      add_mirk("mirk4", "MIRK4", b, v, D, c);
    }
    {
      VectorXd b(4), v(4), c(4);
      b << 23.0 / 162, 5.0 / 22, -2.0 / 189, 4000.0 / 6237;
      v << 0.0, 1.0, 0.0, 40257.0 / 80000;
      c << 0.0, 1.0, 1.5, 9.0 / 20;
      MatrixXd D = MatrixXd::Zero(4, 4);
      D(2, 0) = 3.0 / 8;
      D(2, 1) = 9.0 / 8;
      D(3, 0) = 16929.0 / 160000;
      D(3, 1) = -5643.0 / 32000;
      D(3, 2) = 693.0 / 40000;
      add_mirk("mirk5", "MIRK5", b, v, D, c);
    }
    {
      const double r = std::sqrt(21.0);
      VectorXd b(5), v(5), c(5);
      b << 1.0 / 20, 1.0 / 20, 49.0 / 180, 49.0 / 180, 16.0 / 45;
      v << 0.0, 1.0, 0.5 - 9.0 * r / 98, 0.5 + 9.0 * r / 98, 0.5;
      c << 0.0, 1.0, 0.5 - r / 14, 0.5 + r / 14, 0.5;
      MatrixXd D = MatrixXd::Zero(5, 5);
      D(2, 0) = 1.0 / 14 + r / 98;
      D(2, 1) = -1.0 / 14 + r / 98;
      D(3, 0) = 1.0 / 14 - r / 98;
      D(3, 1) = -1.0 / 14 - r / 98;
      D(4, 0) = -5.0 / 128;
      D(4, 1) = 5.0 / 128;
      D(4, 2) = 7.0 * r / 128;
      D(4, 3) = -7.0 * r / 128;
      add_mirk("mirk6", "MIRK6", b, v, D, c);
    }
    {
      const double r = std::sqrt(3.0);
      MatrixXd A(2, 2);
      A << 0.25, 0.25 - r / 6, 0.25 + r / 6, 0.25;
      add_rk("gl4", "GL4", A, VectorXd::Constant(2, 0.5));
    }
    {
      const double r = std::sqrt(15.0);
      MatrixXd A(3, 3);
      A << 5.0 / 36, 2.0 / 9 - r / 15, 5.0 / 36 - r / 30,
          5.0 / 36 + r / 24, 2.0 / 9, 5.0 / 36 - r / 24,
          5.0 / 36 + r / 30, 2.0 / 9 + r / 15, 5.0 / 36;
      VectorXd b(3);
      b << 5.0 / 18, 4.0 / 9, 5.0 / 18;
      add_rk("gl6", "GL6", A, b);
    }
    return out;
  }();
  return catalog;
}

const CatalogEntry& find_tableau(std::string_view name) {
  const std::string key = lower(name);
  for (const auto& e : builtin_tableaus())
    if (lower(e.key) == key || lower(e.display_name) == key) return e;
  throw std::out_of_range("unknown tableau '" + std::string(name) + "'");
}

OrderConditionSums order_condition_sums(const Tableau& t) {
  const Eigen::VectorXd c = t.A.rowwise().sum();
  const Eigen::VectorXd c2 = c.cwiseProduct(c);
  const Eigen::VectorXd ac = t.A * c;
  OrderConditionSums r;
  r.b = t.b.sum();
  r.bc = t.b.dot(c);
  r.bc2 = t.b.dot(c2);
  r.bac = t.b.dot(ac);
  r.bc3 = t.b.dot(c2.cwiseProduct(c));
  r.bcac = t.b.dot(c.cwiseProduct(ac));
  r.bac2 = t.b.dot(t.A * c2);
  r.baac = t.b.dot(t.A * ac);
  return r;
}

int check_order_conditions(const Tableau& t, int p_max, double tol) {
  const auto s = order_condition_sums(t);
  const double residuals[4] = {
      std::abs(s.b - 1.0),
      std::abs(s.bc - 0.5),
      std::max(std::abs(s.bc2 - 1.0 / 3), std::abs(s.bac - 1.0 / 6)),
      std::max({std::abs(s.bc3 - 0.25), std::abs(s.bcac - 0.125), std::abs(s.bac2 - 1.0 / 12),
                std::abs(s.baac - 1.0 / 24)}),
  };
  const int limit = std::clamp(p_max, 0, 4);
  int p = 0;
  while (p < limit && residuals[p] <= tol) ++p;
  return p;
}

SymplecticResidual check_symplectic(const Tableau& t) {
  const Eigen::MatrixXd BA = t.b.asDiagonal() * t.A;
  SymplecticResidual r;
  r.M = BA + BA.transpose() - t.b * t.b.transpose();
  r.max_abs = r.M.cwiseAbs().maxCoeff();
  return r;
}

SymmetryResidual check_symmetric(const Tableau& t) {
  const int s = t.stages();
  std::vector<std::vector<int>> involutions;
  std::vector<int> current(static_cast<std::size_t>(s));
  std::vector<bool> used(static_cast<std::size_t>(s), false);
  enumerate_involutions(current, used, 0, involutions);

  const Eigen::MatrixXd ones_bt = Eigen::VectorXd::Ones(s) * t.b.transpose();
  SymmetryResidual best;
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& sigma : involutions) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(s, s);
    for (int i = 0; i < s; ++i) P(i, sigma[static_cast<std::size_t>(i)]) = 1.0;
    const double stage = (P * t.A + t.A * P - ones_bt).cwiseAbs().maxCoeff();
    const double weight = (t.b - P * t.b).cwiseAbs().maxCoeff();
    const double score = std::max(stage, weight);
    if (score < best_score) {
      best_score = score;
      best = SymmetryResidual{stage, weight, sigma};
    }
  }
  return best;
}

double alpha(const MirkTableau& m) {
  return m.b.dot(Eigen::VectorXd::Ones(m.v.size()) - 2.0 * m.v);
}

Tableau symplectic_mirk_family(const Eigen::VectorXd& b) {
  if (b.size() < 1) throw std::invalid_argument("symplectic_mirk_family: empty b");
  if (std::abs(b.sum() - 1.0) > kConsistencyTol)
    throw std::invalid_argument("symplectic_mirk_family: b must sum to 1");
  const auto s = b.size();
  Eigen::MatrixXd A = Eigen::VectorXd::Ones(s) * (0.5 * b.transpose());
  Eigen::VectorXd c = A.rowwise().sum();
  return Tableau{"symplectic MIRK family", std::move(A), b, std::move(c)};
}

TableauPropertyReport analyze_tableau(const Tableau& t) {
  TableauPropertyReport r;
  r.name = t.name;
  r.stages = t.stages();
  r.order_verified = check_order_conditions(t, 4);
  r.symplectic_residual = check_symplectic(t).max_abs;
  r.symplectic = r.symplectic_residual <= kConsistencyTol;
  const auto sym = check_symmetric(t);
  r.symmetric_residual = std::max(sym.stage, sym.weight);
  r.symmetric = sym.symmetric(kConsistencyTol);
  r.inverse_explicit = is_inverse_explicit(t);
  r.explicit_method = t.is_explicit();
  if (auto m = as_mirk(t)) r.alpha = alpha(*m);
  return r;
}

namespace {

Eigen::VectorXd json_vector(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("tableau file: missing '") + key + "'");
  const auto& a = j.at(key);
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

Eigen::MatrixXd json_matrix(const nlohmann::json& j, const char* key, Eigen::Index s) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("tableau file: missing '") + key + "'");
  const auto& a = j.at(key);
  if (static_cast<Eigen::Index>(a.size()) != s)
    throw std::invalid_argument(std::string("tableau file: '") + key + "' has wrong row count");
  Eigen::MatrixXd M(s, s);
  for (Eigen::Index i = 0; i < s; ++i) {
    const auto& row = a[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != s)
      throw std::invalid_argument(std::string("tableau file: '") + key + "' has wrong column count");
    for (Eigen::Index k = 0; k < s; ++k) M(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return M;
}

}  // namespace

CatalogEntry load_tableau_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tableau file '" + path + "'");
  const nlohmann::json j = nlohmann::json::parse(in);
  const auto s = static_cast<Eigen::Index>(j.at("s").get<int>());
  const std::string name = j.value("name", path);
  const Eigen::VectorXd b = json_vector(j, "b");
  const Eigen::VectorXd c = json_vector(j, "c");
  if (b.size() != s || c.size() != s) throw std::invalid_argument("tableau file: vector length differs from s");
  if (j.contains("A")) {
    Tableau t = make_tableau(name, json_matrix(j, "A", s), b, c, false);
    auto m = as_mirk(t);
    return CatalogEntry{name, name, std::move(t), std::move(m)};
  }
  const Eigen::VectorXd v = json_vector(j, "v");
  if (v.size() != s) throw std::invalid_argument("tableau file: v length differs from s");
  MirkTableau m = make_mirk(name, b, v, json_matrix(j, "D", s), c);
  Tableau t = mirk_to_rk(m);
  return CatalogEntry{name, name, std::move(t), std::move(m)};
}

std::string report_to_json(const TableauPropertyReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["stages"] = r.stages;
  j["order_verified"] = r.order_verified;
  j["symplectic_residual"] = r.symplectic_residual;
  j["symmetric_residual"] = r.symmetric_residual;
  j["symplectic"] = r.symplectic;
  j["symmetric"] = r.symmetric;
  j["inverse_explicit"] = r.inverse_explicit;
  j["explicit"] = r.explicit_method;
  j["alpha"] = r.alpha ? nlohmann::json(*r.alpha) : nlohmann::json(nullptr);
  j["empirical_order"] = r.empirical_order ? nlohmann::json(*r.empirical_order) : nlohmann::json(nullptr);
  return j.dump(2);
}

std::string report_to_table(const TableauPropertyReport& r) {
  auto yn = [](bool x) { return x ? "yes" : "no"; };
  std::ostringstream os;
  os << std::left;
  os << std::setw(22) << "method" << r.name << '\n';
  os << std::setw(22) << "stages" << r.stages << '\n';
  os << std::setw(22) << "order (p<=4 check)" << r.order_verified << '\n';
  if (r.empirical_order)
    os << std::setw(22) << "order (empirical)" << std::fixed << std::setprecision(2) << *r.empirical_order
       << std::defaultfloat << '\n';
  os << std::setw(22) << "symmetric" << yn(r.symmetric) << "  (residual " << std::scientific
     << std::setprecision(2) << r.symmetric_residual << ")\n";
  os << std::setw(22) << "symplectic" << yn(r.symplectic) << "  (residual " << r.symplectic_residual
     << ")\n" << std::defaultfloat;
  os << std::setw(22) << "inverse explicit" << yn(r.inverse_explicit) << '\n';
  os << std::setw(22) << "explicit" << yn(r.explicit_method) << '\n';
  if (r.alpha) os << std::setw(22) << "alpha" << *r.alpha << '\n';
  return os.str();
}

}  // namespace mii
