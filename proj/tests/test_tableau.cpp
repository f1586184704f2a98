#include "helpers.hpp"
#include "mii/random.hpp"
#include "mii/tableau.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

using namespace mii;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("catalog holds the ten methods with their display names") {
  const auto& cat = builtin_tableaus();
  CHECK(cat.size() == 10);
  CHECK(find_tableau("E. Euler").key == "explicit_euler");
  CHECK(find_tableau("mirk-4").key == "mirk4");
  CHECK(find_tableau("GL6").rk.stages() == 3);
  CHECK_THROWS_AS(find_tableau("mirk9"), std::out_of_range);
}

TEST_CASE("mirk4 coefficients") {
  const auto& e = find_tableau("mirk4");
  REQUIRE(e.mirk);
  const auto& m = *e.mirk;
  CHECK(m.stages() == 3);
  CHECK(m.c(0) == 0.0);
  CHECK(m.c(1) == 1.0);
  CHECK(m.c(2) == 0.5);
  CHECK(m.v(2) == 0.5);
  CHECK(m.D(2, 0) == doctest::Approx(1.0 / 8));
  CHECK(m.D(2, 1) == doctest::Approx(-1.0 / 8));
  CHECK(m.b(2) == doctest::Approx(2.0 / 3));
  const Tableau t = mirk_to_rk(m);
  CHECK(t.A(2, 0) == doctest::Approx(1.0 / 8 + 1.0 / 12));
  CHECK(t.A(2, 1) == doctest::Approx(-1.0 / 8 + 1.0 / 12));
  CHECK(t.A(2, 2) == doctest::Approx(1.0 / 3));
}

TEST_CASE("midpoint and gl4 entries") {
  const auto& mp = find_tableau("midpoint");
  CHECK(mp.rk.A(0, 0) == 0.5);
  CHECK(mp.rk.b(0) == 1.0);
  CHECK(mp.rk.c(0) == 0.5);
  const auto& gl4 = find_tableau("gl4");
  CHECK(gl4.rk.b(0) == 0.5);
  CHECK(gl4.rk.b(1) == 0.5);
  CHECK(gl4.rk.A(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("mirk_to_rk with zero weights returns D") {
  MatrixXd D = MatrixXd::Zero(2, 2);
  D(1, 0) = 0.7;
  const MirkTableau m = make_mirk("z", VectorXd::Zero(2), VectorXd::Constant(2, 0.3), D, VectorXd::Zero(2));
  CHECK(mirk_to_rk(m).A == D);
}

TEST_CASE("invalid tableaus are rejected") {
  MatrixXd D = MatrixXd::Zero(2, 2);
  D(0, 1) = 1;  // not strictly lower triangular
  CHECK_THROWS(make_mirk("bad", VectorXd::Ones(2), VectorXd::Zero(2), D, VectorXd::Zero(2)));
  CHECK_THROWS(make_tableau("bad", MatrixXd::Zero(2, 3), VectorXd::Ones(2), VectorXd::Zero(2)));
}

TEST_CASE("order conditions") {
  CHECK(check_order_conditions(find_tableau("rk4").rk) == 4);
  CHECK(check_order_conditions(find_tableau("explicit_euler").rk) == 1);
  CHECK(check_order_conditions(find_tableau("mirk4").rk) == 4);
  CHECK(check_order_conditions(find_tableau("mirk3").rk) == 3);
  CHECK(check_order_conditions(find_tableau("midpoint").rk) == 2);
  // elementary weights of RK4 by hand
  const auto s = order_condition_sums(find_tableau("rk4").rk);
  CHECK(s.baac == doctest::Approx(1.0 / 24).epsilon(1e-14));
  CHECK(s.bcac == doctest::Approx(1.0 / 8).epsilon(1e-14));
}

TEST_CASE("symplecticity residuals") {
  CHECK(check_symplectic(find_tableau("midpoint").rk).max_abs == 0.0);
  CHECK(check_symplectic(find_tableau("rk4").rk).max_abs > 0.1);
  CHECK(check_symplectic(find_tableau("gl6").rk).max_abs <= 1e-15);
  // M_11 of RK4 = 2 b_1 a_11 - b_1^2 = -1/36
  CHECK(check_symplectic(find_tableau("rk4").rk).M(0, 0) == doctest::Approx(-1.0 / 36));
}

TEST_CASE("symmetry residuals") {
  const auto mp = check_symmetric(find_tableau("midpoint").rk);
  CHECK(mp.stage == 0.0);
  CHECK(mp.weight == 0.0);
  const auto m4 = check_symmetric(find_tableau("mirk4").rk);
  CHECK(m4.stage <= 1e-15);
  CHECK(m4.weight <= 1e-15);
  CHECK_FALSE(check_symmetric(find_tableau("mirk3").rk).symmetric());
  CHECK(check_symmetric(find_tableau("mirk6").rk).symmetric());
}

TEST_CASE("alpha") {
  CHECK(alpha(*find_tableau("mirk4").mirk) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(alpha(*find_tableau("midpoint").mirk) == 0.0);
  CHECK(alpha(*find_tableau("rk4").mirk) == doctest::Approx(1.0));
  // explicit embedding: alpha equals sum of b
  const MirkTableau m = make_mirk("x", (VectorXd(3) << 0.2, 0.5, 0.9).finished(), VectorXd::Zero(3),
                                  MatrixXd::Zero(3, 3), VectorXd::Zero(3));
  CHECK(alpha(m) == doctest::Approx(1.6));
}

TEST_CASE("inverse-explicit structure") {
  CHECK(is_inverse_explicit(find_tableau("rk4").rk));
  CHECK(is_inverse_explicit(find_tableau("mirk5").rk));
  CHECK_FALSE(is_inverse_explicit(find_tableau("gl4").rk));
  // relabelled MIRK4 is still recognised
  const Tableau t = find_tableau("mirk4").rk;
  Eigen::PermutationMatrix<Eigen::Dynamic> P(3);
  P.indices() << 2, 0, 1;
  const Tableau q = make_tableau("perm", P * t.A * P.transpose(), P * t.b, P * t.c);
  CHECK_FALSE(as_mirk(q).has_value());
  CHECK(is_inverse_explicit(q));
}

TEST_CASE("symplectic MIRK family") {
  const Tableau mp = symplectic_mirk_family(VectorXd::Ones(1));
  CHECK(mp.A(0, 0) == 0.5);
  const Tableau two = symplectic_mirk_family(VectorXd::Constant(2, 0.5));
  CHECK(check_order_conditions(two) == 2);
  CHECK(order_condition_sums(two).bc2 == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(check_symplectic(two).max_abs <= 1e-12);
  CHECK_THROWS(symplectic_mirk_family(VectorXd::Constant(2, 0.4)));
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    VectorXd b = rng.uniform_vector(1 + k % 4, 0.1, 1.0);
    b /= b.sum();
    const Tableau t = symplectic_mirk_family(b);
    CHECK(check_order_conditions(t) == 2);
    CHECK(check_symplectic(t).max_abs <= 1e-12);
  }
}

TEST_CASE("tableau JSON in both forms") {
  const std::string a = "tableau_a.json", v = "tableau_v.json";
  std::ofstream(a) << R"({"s": 1, "A": [[0.5]], "b": [1], "c": [0.5]})";
  std::ofstream(v) << R"({"s": 3, "b": [0.16666666666666666, 0.16666666666666666, 0.6666666666666666],
                         "v": [0, 1, 0.5], "D": [[0,0,0],[0,0,0],[0.125,-0.125,0]], "c": [0, 1, 0.5]})";
  const auto ea = load_tableau_json(a);
  CHECK(ea.rk.A(0, 0) == 0.5);
  const auto ev = load_tableau_json(v);
  REQUIRE(ev.mirk);
  const auto rep = analyze_tableau(ev.rk);
  CHECK(rep.order_verified == 4);
  CHECK(rep.inverse_explicit);
  const auto j = nlohmann::json::parse(report_to_json(rep));
  CHECK(j["order_verified"] == 4);
  CHECK(report_to_table(rep).find("symmetric") != std::string::npos);
  std::remove(a.c_str());
  std::remove(v.c_str());
}
