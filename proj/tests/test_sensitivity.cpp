#include <doctest.h>

#include "oracles.hpp"
#include "rot/sensitivity.hpp"

using namespace rot;
using doctest::Approx;

namespace {

struct Instance {
  CostVector c;
  Prob r;
  Prob s;
};

Instance random_instance(std::uint64_t seed, Index n) {
  Rng rng = make_rng(seed, 0);
  CostVector c = oracle::random_cost(rng, n);
  Prob r = oracle::interior_prob(rng, n);
  Prob s = oracle::interior_prob(rng, n);
  return {std::move(c), std::move(r), std::move(s)};
}

// D A^T (A D A^T)^{-1} with dense matrices, D the inverse Hessian diagonal.
Matrix dense_gradient(const Vector& inverse_hessian, Index rows, Index cols) {
  const Matrix a = oracle::reduced_constraints(rows, cols);
  const Matrix d = inverse_hessian.asDiagonal();
  return d * a.transpose() * (a * d * a.transpose()).inverse();
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("multinomial covariance") {
  const Matrix sigma = multinomial_cov(Vector{{0.2, 0.8}});
  CHECK(sigma(0, 0) == Approx(0.16));
  CHECK(sigma(0, 1) == Approx(-0.16));
  CHECK(sigma(1, 1) == Approx(0.16));
  CHECK(max_abs(multinomial_cov(Vector{{0.0, 1.0, 0.0}})) == 0.0);
  const Matrix u = multinomial_cov(Prob::uniform(4));
  CHECK(max_abs(u * Vector::Ones(4)) < 1e-16);
}

TEST_CASE("plan gradient is a right inverse of the reduced constraints") {
  for (const Regularizer& reg : {Regularizer::entropy(), Regularizer::burg(), Regularizer::lp_quasi(0.5)}) {
    CAPTURE(reg.name());
    for (Index n = 1; n <= 5; ++n) {
      const Instance inst = random_instance(30 + std::uint64_t(n), n);
      const TransportPlan plan = solve(reg, inst.c, inst.r, inst.s, 0.5);
      const SensitivityResult g = plan_gradient(plan);
      REQUIRE(g.grad_phi.rows() == n * n);
      REQUIRE(g.grad_phi.cols() == 2 * n - 1);
      CHECK(g.grad_phi_r().cols() == n);
      const Matrix a = oracle::reduced_constraints(n, n);
      CHECK(max_abs(a * g.grad_phi - Matrix::Identity(2 * n - 1, 2 * n - 1)) < 1e-10);
    }
  }
}

TEST_CASE("plan gradient matches the dense formula") {
  for (const Regularizer& reg : {Regularizer::entropy(), Regularizer::burg(), Regularizer::fermi_dirac(),
                                 Regularizer::beta_potential(0.5), Regularizer::lp_quasi(0.5)}) {
    CAPTURE(reg.name());
    const Instance inst = random_instance(40, 4);
    const TransportPlan plan = solve(reg, inst.c, inst.r, inst.s, 0.3);
    const Vector pi = plan.block_entries();
    Vector inverse_hessian(pi.size());
    // Inverse second derivatives written out per kind.
    for (Index e = 0; e < pi.size(); ++e) {
      const double x = pi[e];
      switch (reg.kind) {
        case RegKind::entropy: inverse_hessian[e] = x; break;
        case RegKind::burg: inverse_hessian[e] = x * x; break;
        case RegKind::fermi_dirac: inverse_hessian[e] = x * (1.0 - x); break;
        case RegKind::beta_potential: inverse_hessian[e] = std::pow(x, 2.0 - reg.param); break;
        case RegKind::lp_quasi:
          inverse_hessian[e] = std::pow(x, 2.0 - reg.param) / (reg.param * (1.0 - reg.param));
          break;
      }
    }
    const Matrix expected = dense_gradient(inverse_hessian, 4, 4);
    CHECK(max_abs(plan_gradient(plan).grad_phi - expected) < 1e-10);

    const SensitivityOperator op(reg, plan.block());
    Rng rng = make_rng(41, 0);
    const Vector x = standard_normal(rng, 7);
    const Vector y = standard_normal(rng, 16);
    CHECK(max_abs(op.apply(x) - expected * x) < 1e-10);
    CHECK(max_abs(op.apply_transpose(y) - expected.transpose() * y) < 1e-10);
  }
}

TEST_CASE("plan gradient matches finite differences of the solver") {
  // Directions that keep both marginals on the simplex: h (e_i - e_j) on r
  // and h e_a on the reduced part of s (mass taken from the last entry).
  constexpr double h = 1e-5;
  for (const Regularizer& reg : {Regularizer::entropy(), Regularizer::burg()}) {
    CAPTURE(reg.name());
    const Instance inst = random_instance(42, 3);
    const double lambda = 0.4;
    const TransportPlan plan = solve(reg, inst.c, inst.r, inst.s, lambda);
    const Matrix g = plan_gradient(plan).grad_phi;

    auto plan_at = [&](const Vector& dr, const Vector& ds) {
      const Prob r(Vector(inst.r.weights() + dr));
      const Prob s(Vector(inst.s.weights() + ds));
      SolverOptions tight;
      tight.tol = 1e-14;
      return solve(reg, inst.c, r, s, lambda, tight).block_entries();
    };

    double worst = 0.0;
    for (Index i = 0; i < 3; ++i) {
      Vector dr = Vector::Zero(3);
      dr[i] += h;
      dr[(i + 1) % 3] -= h;
      const Vector fd = (plan_at(dr, Vector::Zero(3)) - plan_at(-dr, Vector::Zero(3))) / (2 * h);
      Vector db = Vector::Zero(5);
      db.head(3) = dr;
      worst = std::max(worst, max_abs(fd - g * db / h));
    }
    for (Index a = 0; a < 2; ++a) {
      Vector ds = Vector::Zero(3);
      ds[a] += h;
      ds[2] -= h;
      const Vector fd = (plan_at(Vector::Zero(3), ds) - plan_at(Vector::Zero(3), -ds)) / (2 * h);
      worst = std::max(worst, max_abs(fd - g.col(3 + a)));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("entropic block inversion matches the cofactor inverse") {
  // N=2, r = s = (1/2, 1/2): Q = [[1/2, 0, a], [0, 1/2, b], [a, b, 1/2]] with b = 1/2 - a.
  const CostVector c(Vector{{0.0, 1.0, 1.0, 0.0}}, 1.0);
  const Prob half(Vector{{0.5, 0.5}});
  const TransportPlan plan = solve(Regularizer::entropy(), c, half, half, 1.0);
  const double a = oracle::two_point_diagonal(1.0);
  const double b = 0.5 - a;
  const double det = 0.125 - 0.5 * a * a - 0.5 * b * b;
  Matrix expected(3, 2);
  expected << 0.25 - b * b, a * b,
              a * b, 0.25 - a * a,
              -0.5 * a, -0.5 * b;
  expected /= det;
  CHECK(max_abs(entropy_block_schur(plan) - expected) < 1e-12);

  const TransportPlan burg = solve(Regularizer::burg(), c, half, half, 1.0);
  CHECK_THROWS_AS(entropy_block_schur(burg), UnsupportedError);
}

TEST_CASE("plan covariance is symmetric positive semidefinite") {
  for (const Regularizer& reg : {Regularizer::entropy(), Regularizer::burg()}) {
    CAPTURE(reg.name());
    const Instance inst = random_instance(43, 4);
    const TransportPlan plan = solve(reg, inst.c, inst.r, inst.s, 0.5);
    for (const SamplingMode mode : {SamplingMode::one_sample(), SamplingMode::two_sample(0.3)}) {
      const CovarianceResult cov = plan_covariance(reg, plan, inst.c, mode);
      REQUIRE(cov.sigma_plan);
      const Matrix& sigma = *cov.sigma_plan;
      CHECK(max_abs(sigma - sigma.transpose()) == 0.0);
      const Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
      CHECK(eig.eigenvalues().minCoeff() > -1e-12);
      // Plan fluctuations keep total mass.
      CHECK(max_abs(Vector::Ones(16).transpose() * sigma) < 1e-12);

      CHECK(cov.sigma_divergence == Approx(divergence_variance(plan, inst.c, sigma)).epsilon(1e-10));
      CHECK(cov.sigma_divergence ==
            Approx(divergence_variance(reg, plan, inst.c, mode)).epsilon(1e-12));
      const Vector gamma = divergence_gradient(plan, inst.c);
      CHECK(cov.sigma_divergence == Approx(gamma.dot(sigma * gamma)).epsilon(1e-10));
    }
    CHECK_FALSE(plan_covariance(reg, plan, inst.c, SamplingMode::one_sample(), false).sigma_plan);
  }
}

TEST_CASE("two-sample covariance decomposes by marginal") {
  const Instance inst = random_instance(44, 3);
  const TransportPlan plan = solve(Regularizer::entropy(), inst.c, inst.r, inst.s, 0.5);
  const Matrix one = *plan_covariance(Regularizer::entropy(), plan, inst.c, SamplingMode::one_sample()).sigma_plan;
  const Matrix near_one =
      *plan_covariance(Regularizer::entropy(), plan, inst.c, SamplingMode::two_sample(1.0 - 1e-9)).sigma_plan;
  CHECK(max_abs(one - near_one) < 1e-8);

  // delta Sigma_r-part + (1 - delta) Sigma_s-part, each linear in its weight.
  const Matrix g = plan_gradient(plan).grad_phi;
  Matrix noise_r = Matrix::Zero(5, 5);
  noise_r.topLeftCorner(3, 3) = multinomial_cov(inst.r);
  Matrix noise_s = Matrix::Zero(5, 5);
  noise_s.bottomRightCorner(2, 2) = multinomial_cov(inst.s).topLeftCorner(2, 2);
  const double delta = 0.3;
  const Matrix expected = g * (delta * noise_r + (1.0 - delta) * noise_s) * g.transpose();
  const Matrix two = *plan_covariance(Regularizer::entropy(), plan, inst.c, SamplingMode::two_sample(delta)).sigma_plan;
  CHECK(max_abs(two - expected) < 1e-12);

  CHECK(SamplingMode::from_sizes(100, 300).delta == Approx(0.75));
  CHECK_THROWS_AS(SamplingMode::two_sample(1.0), ConfigError);
  CHECK_THROWS_AS(SamplingMode::two_sample(0.0), ConfigError);
}

TEST_CASE("degenerate marginals give zero variance") {
  const Instance inst = random_instance(45, 3);
  const Prob dirac = Prob::dirac(3, 1);
  const TransportPlan plan = solve(Regularizer::entropy(), inst.c, dirac, inst.s, 0.5);
  const CovarianceResult cov =
      plan_covariance(Regularizer::entropy(), plan, inst.c, SamplingMode::one_sample());
  CHECK(cov.sigma_divergence == 0.0);
  CHECK(max_abs(*cov.sigma_plan) < 1e-15);
  const DualPotentials d = dual_potentials(plan, inst.c);
  CHECK(objective_variance(d, dirac) == 0.0);
}

TEST_CASE("divergence gradient differentiates the p-th root") {
  const Instance inst = random_instance(46, 3);
  const CostVector squared(inst.c.entries().cwiseAbs2(), 2.0);
  const TransportPlan plan = solve(Regularizer::entropy(), squared, inst.r, inst.s, 0.2);
  const Vector gamma = divergence_gradient(plan, squared);
  const Vector pi = plan.block_entries();
  const Vector cost = squared.entries();
  constexpr double h = 1e-7;
  for (Index e = 0; e < pi.size(); ++e) {
    const auto root = [&](double shift) { return std::sqrt(cost.dot(pi) + shift * cost[e]); };
    CHECK(gamma[e] == Approx((root(h) - root(-h)) / (2 * h)).epsilon(1e-6));
  }
  CHECK(max_abs(divergence_gradient(plan, inst.c) - inst.c.entries()) == 0.0);
}

TEST_CASE("objective variance") {
  CHECK(objective_variance({Vector::Constant(3, 2.5), Vector::Zero(3), {0, 1, 2}, {0, 1, 2}},
                           Prob(Vector{{0.2, 0.3, 0.5}})) == Approx(0.0).scale(1.0));
  // alpha = (1, 0), r = (p, 1 - p): p (1 - p).
  CHECK(objective_variance({Vector{{1.0, 0.0}}, Vector::Zero(2), {0, 1}, {0, 1}},
                           Prob(Vector{{0.3, 0.7}})) == Approx(0.21));

  // Monte Carlo: sqrt(n) (objective(r_hat) - objective(r)).
  const Instance inst = random_instance(47, 3);
  const double lambda = 0.3;
  const TransportPlan plan = solve(Regularizer::entropy(), inst.c, inst.r, inst.s, lambda);
  const double predicted = objective_variance(dual_potentials(plan, inst.c), inst.r);
  const double base = regularized_objective(inst.c, plan);
  constexpr Index n = 20000;
  constexpr int reps = 4000;
  std::vector<double> draws;
  Rng rng = make_rng(48, 0);
  for (int k = 0; k < reps; ++k) {
    const Prob r_hat = multinomial_empirical(rng, inst.r, n);
    const TransportPlan p = solve(Regularizer::entropy(), inst.c, r_hat, inst.s, lambda);
    draws.push_back(std::sqrt(double(n)) * (regularized_objective(inst.c, p) - base));
  }
  // Three standard errors of a Gaussian sample variance.
  CHECK(std::abs(oracle::variance(draws) / predicted - 1.0) < 3.0 * std::sqrt(2.0 / reps));
}

TEST_CASE("limit law sampler reproduces the plan covariance") {
  const Instance inst = random_instance(49, 3);
  const TransportPlan plan = solve(Regularizer::entropy(), inst.c, inst.r, inst.s, 0.5);
  for (const SamplingMode mode : {SamplingMode::one_sample(), SamplingMode::two_sample(0.4)}) {
    const Matrix sigma = *plan_covariance(Regularizer::entropy(), plan, inst.c, mode).sigma_plan;
    const LimitLawSampler sampler(Regularizer::entropy(), plan, mode);
    constexpr int draws = 40000;
    Rng rng = make_rng(50, 0);
    Matrix sample(draws, 9);
    std::vector<double> projected;
    for (int k = 0; k < draws; ++k) {
      sample.row(k) = sampler.draw(rng);
      projected.push_back(inst.c.entries().dot(sample.row(k).transpose()));
    }
    const Matrix empirical = sample.transpose() * sample / double(draws);
    double worst = 0.0;
    for (Index i = 0; i < 9; ++i)
      for (Index j = 0; j < 9; ++j) {
        const double se = std::sqrt((sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / draws);
        worst = std::max(worst, std::abs(empirical(i, j) - sigma(i, j)) / se);
      }
    CHECK(worst < 4.0);
    const double predicted = inst.c.entries().dot(sigma * inst.c.entries());
    CHECK(oracle::variance(projected) == Approx(predicted).epsilon(3.0 * std::sqrt(2.0 / draws)));
  }
}

TEST_CASE("sensitivity does not depend on cost shifts") {
  const Instance inst = random_instance(51, 4);
  const CostVector shifted(inst.c.entries().array() + 3.0, 1.0);
  const TransportPlan a = solve(Regularizer::burg(), inst.c, inst.r, inst.s, 0.5);
  const TransportPlan b = solve(Regularizer::burg(), shifted, inst.r, inst.s, 0.5);
  CHECK(max_abs(plan_gradient(a).grad_phi - plan_gradient(b).grad_phi) < 1e-8);
}
