#include <doctest.h>

#include "oracles.hpp"
#include "rot/regularizer.hpp"

using namespace rot;
using doctest::Approx;

namespace {

std::vector<Regularizer> all_kinds() {
  return {Regularizer::entropy(), Regularizer::burg(), Regularizer::fermi_dirac(),
          Regularizer::beta_potential(0.5), Regularizer::beta_potential(0.2),
          Regularizer::lp_quasi(0.5), Regularizer::lp_quasi(0.8)};
}

// Interior points; Fermi-Dirac needs entries below 1.
Vector interior_point(Rng& rng, Index n) {
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[i] = unit(rng);
  return x;
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("values at reference points") {
  const Vector ones = Vector::Ones(5);
  CHECK(value(Regularizer::entropy(), ones) == Approx(0.0));
  CHECK(value(Regularizer::burg(), ones) == Approx(0.0));
  // 0 log 0 = 0: the zero entry contributes 0 - 0 + 1.
  CHECK(value(Regularizer::entropy(), Vector{{0.0, 1.0}}) == Approx(1.0));
  // Quasi-norm carries the convex sign.
  CHECK(value(Regularizer::lp_quasi(0.5), Vector{{4.0}}) == Approx(-2.0));
  CHECK_THROWS_AS(value(Regularizer::burg(), Vector{{0.0, 1.0}}), DomainError);
  CHECK_THROWS_AS(value(Regularizer::fermi_dirac(), Vector{{1.0}}), DomainError);
  CHECK_THROWS_AS(value(Regularizer::entropy(), Vector{{-0.1}}), DomainError);
}

TEST_CASE("gradients at reference points") {
  const Vector ones = Vector::Ones(3);
  CHECK(grad(Regularizer::entropy(), ones).cwiseAbs().maxCoeff() == 0.0);
  const Vector x{{0.2, 0.5, 2.0}};
  const Vector burg = grad(Regularizer::burg(), x);
  for (Index i = 0; i < 3; ++i) CHECK(burg[i] == Approx(1.0 - 1.0 / x[i]));
  CHECK(grad(Regularizer::entropy(), x)[0] == Approx(std::log(0.2)));
  CHECK_THROWS_AS(grad(Regularizer::entropy(), Vector{{0.0}}), DomainError);
}

TEST_CASE("Hessian diagonals at reference points") {
  const Vector x{{0.2, 0.5, 2.0}};
  const Vector h = hess_diag(Regularizer::entropy(), x);
  for (Index i = 0; i < 3; ++i) CHECK(h[i] == Approx(1.0 / x[i]));
  CHECK((hess_diag(Regularizer::beta_potential(0.5), Vector::Ones(4)).array() - 1.0).abs().maxCoeff() <
        1e-15);
  CHECK((hess_diag(Regularizer::lp_quasi(0.5), Vector::Ones(4)).array() - 0.25).abs().maxCoeff() <
        1e-15);
  for (const Regularizer& reg : all_kinds()) {
    Rng rng = make_rng(5, 0);
    const Vector y = interior_point(rng, 50);
    CHECK(hess_diag(reg, y).minCoeff() > 0.0);
    CHECK((inverse_hess_diag(reg, y).array() * hess_diag(reg, y).array() - 1.0).abs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("gradient and Hessian match central differences") {
  constexpr double h = 1e-6;
  for (const Regularizer& reg : all_kinds()) {
    CAPTURE(reg.name());
    Rng rng = make_rng(6, 0);
    double worst_grad = 0.0;
    double worst_hess = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const double x = interior_point(rng, 1)[0];
      const Vector xp{{x + h}};
      const Vector xm{{x - h}};
      const Vector x0{{x}};
      worst_grad = std::max(
          worst_grad, rel_error((value(reg, xp) - value(reg, xm)) / (2 * h), grad(reg, x0)[0]));
      worst_hess = std::max(worst_hess, rel_error((grad(reg, xp)[0] - grad(reg, xm)[0]) / (2 * h),
                                                  hess_diag(reg, x0)[0]));
    }
    CHECK(worst_grad < 1e-5);
    CHECK(worst_hess < 1e-5);
  }
}

TEST_CASE("conjugate gradient inverts the gradient") {
  CHECK((conjugate_grad(Regularizer::entropy(), Vector::Zero(3)).array() - 1.0).abs().maxCoeff() ==
        0.0);
  CHECK((conjugate_grad(Regularizer::burg(), Vector::Zero(3)).array() - 1.0).abs().maxCoeff() == 0.0);
  for (const Regularizer& reg : all_kinds()) {
    CAPTURE(reg.name());
    Rng rng = make_rng(7, 0);
    // Every kind contains the negative orthant in its conjugate domain.
    std::uniform_real_distribution<double> negative(-5.0, -0.01);
    Vector y(100);
    for (Index i = 0; i < y.size(); ++i) y[i] = negative(rng);
    REQUIRE(in_conjugate_domain(reg, y));
    CHECK((grad(reg, conjugate_grad(reg, y)) - y).cwiseAbs().maxCoeff() < 1e-10);
    const Vector x = interior_point(rng, 100);
    CHECK((conjugate_grad(reg, grad(reg, x)) - x).cwiseAbs().maxCoeff() < 1e-10);

    // Fenchel-Young equality at the matched pair.
    const double fy = conjugate_value(reg, y);
    const Vector xs = conjugate_grad(reg, y);
    CHECK(fy == Approx(y.dot(xs) - value(reg, xs)).epsilon(1e-10));
  }
  CHECK_FALSE(in_conjugate_domain(Regularizer::burg(), Vector{{1.0}}));
  CHECK_FALSE(in_conjugate_domain(Regularizer::lp_quasi(0.5), Vector{{0.0}}));
  CHECK_THROWS_AS(conjugate_grad(Regularizer::burg(), Vector{{2.0}}), DomainError);
}

TEST_CASE("conjugate value differentiates to conjugate_grad") {
  constexpr double h = 1e-6;
  for (const Regularizer& reg : all_kinds()) {
    CAPTURE(reg.name());
    for (const double y : {-3.0, -0.7, -0.05}) {
      const double fd = (conjugate_value(reg, Vector{{y + h}}) - conjugate_value(reg, Vector{{y - h}})) /
                        (2 * h);
      CHECK(rel_error(fd, conjugate_grad(reg, Vector{{y}})[0]) < 1e-6);
    }
  }
}

TEST_CASE("parameter validation and parsing") {
  CHECK_THROWS_AS(Regularizer::beta_potential(0.0), ConfigError);
  CHECK_THROWS_AS(Regularizer::beta_potential(1.0), ConfigError);
  CHECK_THROWS_AS(Regularizer::lp_quasi(1.0), ConfigError);
  CHECK(Regularizer::parse("entropy") == Regularizer::entropy());
  CHECK(Regularizer::parse("burg") == Regularizer::burg());
  CHECK(Regularizer::parse("fermi") == Regularizer::fermi_dirac());
  CHECK(Regularizer::parse("beta:0.3") == Regularizer::beta_potential(0.3));
  CHECK(Regularizer::parse("lpq:0.5") == Regularizer::lp_quasi(0.5));
  CHECK_THROWS_AS(Regularizer::parse("lpq:2"), ConfigError);
  CHECK_THROWS_AS(Regularizer::parse("l2"), ConfigError);
  for (const Regularizer& reg : all_kinds()) CHECK(Regularizer::parse(reg.name()) == reg);
}

TEST_CASE("free functions accept other scalar types") {
  const Eigen::Vector3f x(0.5f, 1.0f, 2.0f);
  const Eigen::VectorXf g = grad(Regularizer::entropy(), x);
  CHECK(g[1] == Approx(0.0f));
  CHECK(g[2] == Approx(std::log(2.0f)));
}
