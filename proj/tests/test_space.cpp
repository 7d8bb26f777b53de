#include <doctest.h>

#include "oracles.hpp"
#include "rot/space.hpp"

using namespace rot;
using doctest::Approx;

TEST_CASE("grid space uses the corner convention") {
  const GroundSpace single = build_grid_space(1, 1.0);
  CHECK(single.size() == 1);
  CHECK(single.points().row(0).norm() == 0.0);

  CHECK(build_grid_space(10, 1.0).size() == 100);

  const GroundSpace square = build_grid_space(2, 1.0);
  REQUIRE(square.size() == 4);
  double nearest = INFINITY;
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j)
      if (i != j) nearest = std::min(nearest, (square.points().row(i) - square.points().row(j)).norm());
  CHECK(nearest == Approx(1.0));

  const GroundSpace wide = build_grid_space(3, 2.0);
  CHECK(wide.points().maxCoeff() == Approx(2.0));
  CHECK(wide.points().minCoeff() == 0.0);

  CHECK_THROWS_AS(build_grid_space(0, 1.0), ConfigError);
  CHECK_THROWS_AS(build_grid_space(2, 0.0), ConfigError);
}

TEST_CASE("pixel grid is row-major with pixel-size spacing") {
  const GroundSpace grid = build_pixel_grid(3, 2, 15.0);
  REQUIRE(grid.size() == 6);
  CHECK(grid.points()(4, 0) == Approx(15.0));  // pixel (x=1, y=1)
  CHECK(grid.points()(4, 1) == Approx(15.0));
  CHECK(grid.points()(2, 0) == Approx(30.0));
  CHECK(grid.points()(2, 1) == 0.0);
}

TEST_CASE("metric costs") {
  Matrix two(2, 1);
  two << 0.0, 1.0;
  const CostVector c = cost_from_metric(GroundSpace(two), 1.0, Metric::euclidean);
  CHECK(c.entries() == Vector{{0.0, 1.0, 1.0, 0.0}});
  CHECK(c.c_max() == 1.0);

  const CostVector unit = cost_from_metric(build_grid_space(2, 1.0), 1.0, Metric::euclidean);
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 4; ++j) {
      if (i == j) {
        CHECK(unit(i, j) == 0.0);
      } else {
        const bool edge = std::abs(unit(i, j) - 1.0) < 1e-15;
        const bool diagonal = std::abs(unit(i, j) - std::sqrt(2.0)) < 1e-15;
        CHECK((edge || diagonal));
      }
    }
  }

  Rng rng = make_rng(1, 0);
  const GroundSpace cloud(oracle::random_points(rng, 7, 3));
  for (const Metric m : {Metric::euclidean, Metric::squared_euclidean}) {
    const RowMatrix table = cost_from_metric(cloud, 1.5, m).matrix();
    CHECK((table - table.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(table.diagonal().cwiseAbs().maxCoeff() == 0.0);
  }

  // Squared Euclidean is the squared distance itself.
  const CostVector sq = cost_from_metric(cloud, 1.0, Metric::squared_euclidean);
  CHECK(sq(2, 5) == Approx((cloud.points().row(2) - cloud.points().row(5)).squaredNorm()));
  // p applies on top of the metric.
  const CostVector cubed = cost_from_metric(cloud, 3.0, Metric::euclidean);
  CHECK(cubed(1, 4) ==
        Approx(std::pow((cloud.points().row(1) - cloud.points().row(4)).norm(), 3.0)));
}

TEST_CASE("cost vector validation") {
  CHECK_THROWS_AS(CostVector(Vector{{0.0, 1.0, 1.0}}, 1.0), ConfigError);
  CHECK_THROWS_AS(CostVector(Vector{{0.0, -1.0, 1.0, 0.0}}, 1.0), ConfigError);
  CHECK_THROWS_AS(CostVector(Vector{{0.0, 1.0, 1.0, 0.0}}, 0.5), ConfigError);
  Matrix table(2, 2);
  table << 0.0, 3.0, 2.0, 0.0;
  const CostVector c = CostVector::from_table(table);
  CHECK(c(0, 1) == 3.0);
  CHECK(c(1, 0) == 2.0);
  CHECK(c.c_max() == 3.0);
  const RowMatrix sub = c.submatrix({1}, {0, 1});
  CHECK(sub(0, 0) == 2.0);
  CHECK(sub(0, 1) == 0.0);
}

TEST_CASE("probability vectors") {
  CHECK_NOTHROW(Prob(Vector{{0.25, 0.75}}));
  CHECK_NOTHROW(Prob(Vector{{0.25, 0.75 + 5e-13}}));
  CHECK_THROWS_AS(Prob(Vector{{0.25, 0.76}}), ConfigError);
  CHECK_THROWS_AS(Prob(Vector{{-0.25, 1.25}}), ConfigError);
  const Prob renorm(Vector{{1.0, 3.0}}, true);
  CHECK(renorm[0] == Approx(0.25));
  CHECK_THROWS_AS(Prob(Vector::Zero(3), true), ConfigError);

  const Prob p(Vector{{0.5, 0.0, 0.5}});
  CHECK(p.support() == IndexList{0, 2});
  CHECK_FALSE(p.has_full_support());
  CHECK(p.restricted({2}) == Vector{{0.5}});
  CHECK(Prob::uniform(4)[3] == Approx(0.25));
  CHECK(Prob::dirac(3, 1).support() == IndexList{1});
}

TEST_CASE("empirical distributions count occurrences") {
  const std::vector<Index> sample = {0, 0, 1, 2};
  const Prob e = empirical_distribution(sample, 3);
  CHECK(e.weights() == Vector{{0.5, 0.25, 0.25}});
  const std::vector<Index> dirac = {1};
  CHECK(empirical_distribution(dirac, 2).weights() == Vector{{0.0, 1.0}});
  CHECK_THROWS_AS(empirical_distribution(std::vector<Index>{}, 2), ConfigError);
  CHECK_THROWS_AS(empirical_distribution(std::vector<Index>{2}, 2), ConfigError);

  const std::vector<Index> counts = {3, 1};
  CHECK(empirical_from_counts(counts).weights() == Vector{{0.75, 0.25}});

  // Law of large numbers at n = 1e5.
  Rng rng = make_rng(3, 0);
  const Prob half(Vector{{0.5, 0.5}});
  const Prob large = multinomial_empirical(rng, half, 100000);
  CHECK(std::abs(large[0] - 0.5) < 0.01);
}

TEST_CASE("cost quantiles interpolate order statistics") {
  const CostVector c(Vector{{0.0, 1.0, 1.0, 0.0}}, 1.0);
  CHECK(cost_quantile(c, 0.5) == Approx(0.5));
  CHECK(cost_quantile(c, 0.0) == 0.0);
  CHECK(cost_quantile(c, 1.0) == 1.0);
  // Sorted 1, 2, 3, 4 at level 0.25: position 0.75 -> 1.75.
  CHECK(quantile(Vector{{4.0, 1.0, 3.0, 2.0}}, 0.25) == Approx(1.75));
  CHECK_THROWS_AS(cost_quantile(c, 1.5), ConfigError);
  CHECK(scaled_lambda(c, 2.0) == Approx(1.0));
  CHECK_THROWS_AS(scaled_lambda(CostVector(Vector::Zero(4), 1.0), 1.0), ConfigError);
}

TEST_CASE("constraint operator reproduces marginals") {
  Rng rng = make_rng(4, 0);
  for (const auto& [m, k] : std::vector<std::pair<Index, Index>>{{3, 3}, {2, 5}, {4, 1}}) {
    const ConstraintOperator op(m, k);
    const Vector plan = dirichlet(rng, 1.0, m * k).weights();
    const RowMatrix table = Eigen::Map<const RowMatrix>(plan.data(), m, k);
    const Vector marginals = op.apply(plan);
    CHECK((marginals.head(m) - table.rowwise().sum()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((marginals.tail(k) - table.colwise().sum().transpose()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(op.apply_reduced(plan) == marginals.head(m + k - 1));

    const Matrix dense = oracle::reduced_constraints(m, k);
    CHECK((op.dense_reduced() - dense).cwiseAbs().maxCoeff() == 0.0);
    const Vector mu = standard_normal(rng, m + k - 1);
    CHECK((op.apply_reduced_transpose(mu) - dense.transpose() * mu).cwiseAbs().maxCoeff() < 1e-14);
    const Vector w = dirichlet(rng, 1.0, m * k).weights();
    CHECK((op.weighted_gram(w) - dense * w.asDiagonal() * dense.transpose()).cwiseAbs().maxCoeff() <
          1e-15);
  }
}

TEST_CASE("reduced constraint operator has full row rank") {
  for (Index n = 1; n <= 6; ++n) {
    const Matrix a = ConstraintOperator(n).dense_reduced();
    CHECK(Eigen::FullPivLU<Matrix>(a).rank() == 2 * n - 1);
  }
}

TEST_CASE("constraint operator works on other scalar types") {
  const ConstraintOperator op(2, 2);
  const Eigen::Vector4f plan(0.1f, 0.2f, 0.3f, 0.4f);
  const Eigen::VectorXf out = op.apply(plan);
  CHECK(out[0] == Approx(0.3f));
  CHECK(out[3] == Approx(0.6f));
}

TEST_CASE("metric names") {
  CHECK(parse_metric("sqeuclidean") == Metric::squared_euclidean);
  CHECK(parse_metric("squared_euclidean") == Metric::squared_euclidean);
  CHECK(to_string(parse_metric("euclidean")) == "euclidean");
  CHECK_THROWS_AS(parse_metric("manhattan"), ConfigError);
}
