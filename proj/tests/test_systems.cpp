#include "helpers.hpp"
#include "mii/integrators.hpp"
#include "mii/random.hpp"
#include "mii/systems.hpp"

#include <doctest.h>

#include <cmath>

using namespace mii;
using Eigen::VectorXd;

namespace {

void check_gradient_and_hessian(const HamiltonianSystem& sys, std::uint64_t seed) {
  Rng rng(seed);
  for (int k = 0; k < 100; ++k) {
    VectorXd y = rng.uniform_vector(sys.dim(), -1, 1);
    if (y.norm() > 1) y /= y.norm();
    const VectorXd g = sys.grad(y);
    CHECK(testutil::rel_err(g, testutil::fd_gradient(sys.H, y, 1e-5)) <= 1e-6);
    if (sys.has_hessian()) {
      const Eigen::MatrixXd H = sys.hess(y);
      for (int i = 0; i < sys.dim(); ++i) {
        auto gi = [&](const VectorXd& x) { return sys.grad(x)(i); };
        CHECK(testutil::rel_err(H.row(i).transpose(), testutil::fd_gradient(gi, y, 1e-5)) <= 1e-6);
      }
    }
    // f is orthogonal to grad H
    CHECK(std::abs(sys.field(y).dot(g)) <= 1e-12);
  }
}

}  // namespace

TEST_CASE("canonical J") {
  const auto J = canonical_J(2);
  CHECK(J(0, 2) == 1.0);
  CHECK(J(2, 0) == -1.0);
  CHECK((J + J.transpose()).norm() == 0.0);
  const VectorXd x = (VectorXd(4) << 1, 2, 3, 4).finished();
  CHECK((apply_J(x) - J * x).norm() == 0.0);
}

TEST_CASE("FPUT") {
  const auto s = fput(1, 2.0);
  CHECK(s.separable);
  CHECK(s.H(VectorXd::Zero(4)) == 0.0);
  CHECK(s.H((VectorXd(4) << 1, 0, 0, 0).finished()) == doctest::Approx(0.5));
  // 0.5 (p1^2 + p2^2) + 2 q2^2 + ((q1-q2)^4 + (q1+q2)^4)/4
  const VectorXd y = (VectorXd(4) << 0.3, -0.2, 0.5, 0.1).finished();
  const double expect = 0.5 * (0.25 + 0.01) + 2 * 0.04 + 0.25 * (std::pow(0.5, 4) + std::pow(0.1, 4));
  CHECK(s.H(y) == doctest::Approx(expect).epsilon(1e-14));
  check_gradient_and_hessian(s, 1);
  CHECK_THROWS(fput(0));
}

TEST_CASE("double pendulum") {
  const auto s = double_pendulum();
  CHECK_FALSE(s.separable);
  CHECK(s.H(VectorXd::Zero(4)) == doctest::Approx(-3.0));
  const double q1 = 0.1, q2 = 0.3, p1 = -0.4, p2 = 0.2;
  const double expect = (0.5 * p1 * p1 + p2 * p2 - p1 * p2 * std::cos(q1 - q2)) / (1 + std::pow(std::sin(q1 - q2), 2)) -
                        2 * std::cos(q1) - std::cos(q2);
  CHECK(s.H((VectorXd(4) << q1, q2, p1, p2).finished()) == doctest::Approx(expect).epsilon(1e-15));
  Rng rng(2);
  for (int k = 0; k < 100; ++k) {
    VectorXd y = rng.uniform_vector(4, -1, 1);
    VectorXd flipped = y;
    flipped.tail(2) *= -1;
    CHECK(s.H(y) == doctest::Approx(s.H(flipped)).epsilon(1e-14));
  }
  check_gradient_and_hessian(s, 3);
}

TEST_CASE("Henon-Heiles") {
  const auto s = henon_heiles();
  CHECK(s.separable);
  CHECK(s.H(VectorXd::Zero(4)) == 0.0);
  CHECK(s.H((VectorXd(4) << 0, 1, 0, 0).finished()) == doctest::Approx(1.0 / 6));
  check_gradient_and_hessian(s, 4);
  Rng rng(6);
  for (int k = 0; k < 20; ++k) {
    const auto Hs = s.hess(rng.uniform_vector(4, -1, 1));
    CHECK(Hs.block(0, 2, 2, 2).norm() == 0.0);
  }
}

TEST_CASE("quadratic and zero systems, lookup by name") {
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(2, 2);
  const auto q = quadratic_system(S);
  CHECK(q.H((VectorXd(2) << 1, 1).finished()) == doctest::Approx(1.0));
  const auto z = zero_system(2);
  CHECK(z.field(VectorXd::Ones(4)).norm() == 0.0);
  CHECK(system_by_name("henon_heiles").name == henon_heiles().name);
  CHECK(system_by_name("double_pendulum").dim() == 4);
  CHECK(system_by_name("fput").separable);
  CHECK_THROWS(system_by_name("lorenz"));
}

TEST_CASE("reference trajectories conserve energy") {
  Rng rng(7);
  for (const auto& s : {fput(), double_pendulum(), henon_heiles()}) {
    VectorXd y0 = rng.uniform_vector(4, -1, 1);
    y0 *= 0.5 / y0.norm();
    const Trajectory t = reference_solve(s, y0, 0.5, 20);
    double drift = 0;
    for (int n = 0; n <= t.steps(); ++n) drift = std::max(drift, std::abs(s.H(t.point(n)) - s.H(y0)));
    CHECK(drift <= 1e-8);
  }
}
