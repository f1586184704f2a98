#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mii {

/// Butcher tableau (A, b, c) of an s-stage Runge--Kutta method.
struct Tableau {
  std::string name;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;

  int stages() const { return static_cast<int>(b.size()); }
  /// True when A is strictly lower triangular.
  bool is_explicit() const;
};

/// Extended tableau of a mono-implicit method: A = D + v b^T with D strictly
/// lower triangular. Stage i reads
///   k_i = f(y_n + v_i (y_{n+1} - y_n) + h sum_j d_ij k_j).
struct MirkTableau {
  std::string name;
  Eigen::VectorXd b;
  Eigen::VectorXd v;
  Eigen::MatrixXd D;
  Eigen::VectorXd c;

  int stages() const { return static_cast<int>(b.size()); }
};

/// Validates dimensions; when `require_consistent` is set, also c_i = sum_j A_ij.
Tableau make_tableau(std::string name, Eigen::MatrixXd A, Eigen::VectorXd b,
                     Eigen::VectorXd c, bool require_consistent = true);

/// Validates dimensions and that D is strictly lower triangular.
MirkTableau make_mirk(std::string name, Eigen::VectorXd b, Eigen::VectorXd v,
                      Eigen::MatrixXd D, Eigen::VectorXd c);

Tableau mirk_to_rk(const MirkTableau& m);

/// Recovers a MIRK representation of `t` if one exists in the given stage
/// order (A_ij = v_i b_j for all j >= i). Explicit methods come back with v = 0.
std::optional<MirkTableau> as_mirk(const Tableau& t, double tol = 1e-12);

/// Inverse explicit up to a relabelling of stages.
bool is_inverse_explicit(const Tableau& t, double tol = 1e-12);

struct CatalogEntry {
  std::string key;           // lookup key, e.g. "mirk4"
  std::string display_name;  // name used in figures, e.g. "E. Euler"
  Tableau rk;
  std::optional<MirkTableau> mirk;
};

/// E. Euler, I. Euler, RK4, Midpoint, MIRK3-6, GL4, GL6.
const std::vector<CatalogEntry>& builtin_tableaus();

/// Case-insensitive lookup by key or display name. Throws std::out_of_range.
const CatalogEntry& find_tableau(std::string_view name);

/// Elementary weights for the rooted trees up to order four, computed with
/// c = A 1 (independent of the stored c).
struct OrderConditionSums {
  double b = 0;       // sum b_i                  = 1
  double bc = 0;      // sum b_i c_i              = 1/2
  double bc2 = 0;     // sum b_i c_i^2            = 1/3
  double bac = 0;     // sum b_i a_ij c_j         = 1/6
  double bc3 = 0;     // sum b_i c_i^3            = 1/4
  double bcac = 0;    // sum b_i c_i a_ij c_j     = 1/8
  double bac2 = 0;    // sum b_i a_ij c_j^2       = 1/12
  double baac = 0;    // sum b_i a_ij a_jk c_k    = 1/24
};

OrderConditionSums order_condition_sums(const Tableau& t);

/// Largest p <= p_max (p_max <= 4) whose conditions all hold to `tol`.
int check_order_conditions(const Tableau& t, int p_max = 4, double tol = 1e-12);

struct SymplecticResidual {
  Eigen::MatrixXd M;  // b_i a_ij + b_j a_ji - b_i b_j
  double max_abs = 0;
};

SymplecticResidual check_symplectic(const Tableau& t);

struct SymmetryResidual {
  double stage = 0;   // ||P A + A P - 1 b^T||_max
  double weight = 0;  // ||b - P b||_max
  std::vector<int> permutation;  // involution defining P
  bool symmetric(double tol = 1e-12) const { return stage <= tol && weight <= tol; }
};

/// Minimises both residuals over involutive stage permutations.
SymmetryResidual check_symmetric(const Tableau& t);

/// b^T (1 - 2 v).
double alpha(const MirkTableau& m);

/// Tableau with every row of A equal to b^T / 2. Requires sum(b) = 1.
Tableau symplectic_mirk_family(const Eigen::VectorXd& b);

struct TableauPropertyReport {
  std::string name;
  int stages = 0;
  int order_verified = 0;
  double symplectic_residual = 0;
  double symmetric_residual = 0;
  bool symplectic = false;
  bool symmetric = false;
  bool inverse_explicit = false;
  bool explicit_method = false;
  std::optional<double> alpha;
  std::optional<double> empirical_order;
};

TableauPropertyReport analyze_tableau(const Tableau& t);

/// Reads {"s","A","b","c"} or {"s","b","v","D","c"} JSON.
CatalogEntry load_tableau_json(const std::string& path);
std::string report_to_json(const TableauPropertyReport& r);
std::string report_to_table(const TableauPropertyReport& r);

}  // namespace mii
