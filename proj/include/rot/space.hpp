#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string_view>

#include "rot/error.hpp"
#include "rot/types.hpp"

namespace rot {

/// Finite ground space: one point per row of `points`.
class GroundSpace {
 public:
  explicit GroundSpace(Matrix points);

  Index size() const noexcept { return points_.rows(); }
  Index dimension() const noexcept { return points_.cols(); }
  const Matrix& points() const noexcept { return points_; }

 private:
  Matrix points_;
};

/// L x L equidistant grid over [0, extent]^2 with the corners included.
/// Point (a, b) has index a * L + b and coordinates (a, b) * extent / (L - 1).
GroundSpace build_grid_space(Index side, double extent);

/// width x height pixel grid with spacing `pixel_size`; pixel (row y, column x)
/// has index y * width + x and coordinates (x, y) * pixel_size.
GroundSpace build_pixel_grid(Index width, Index height, double pixel_size);

enum class Metric { euclidean, squared_euclidean };

Metric parse_metric(std::string_view name);
std::string_view to_string(Metric metric);

/// Cost of moving one unit from x_i to x_j, stored row-major as a length N^2
/// vector. `c_max` is the largest entry, i.e. the right end of the threshold
/// range for colocalization curves.
class CostVector {
 public:
  CostVector(Vector entries, double p);

  /// Arbitrary nonnegative square cost table.
  static CostVector from_table(const Matrix& table, double p = 1.0);

  const Vector& entries() const noexcept { return entries_; }
  Index size() const noexcept { return n_; }
  double p() const noexcept { return p_; }
  double c_max() const noexcept { return c_max_; }

  double operator()(Index i, Index j) const { return entries_[i * n_ + j]; }

  /// N x N view as a row-major matrix.
  RowMatrix matrix() const;
  /// Cost block restricted to the given row and column indices.
  RowMatrix submatrix(const IndexList& rows, const IndexList& cols) const;

 private:
  Vector entries_;
  Index n_ = 0;
  double p_ = 1.0;
  double c_max_ = 0.0;
};

/// Entries d(x_i, x_j)^p for the chosen metric.
CostVector cost_from_metric(const GroundSpace& space, double p, Metric metric);

/// Point of the probability simplex.
class Prob {
 public:
  static constexpr double kTolerance = 1e-12;

  /// Validates nonnegativity and unit mass. With `renormalize` the weights are
  /// divided by their sum instead of being checked against it.
  explicit Prob(Vector weights, bool renormalize = false);

  static Prob uniform(Index n);
  static Prob dirac(Index n, Index at);

  const Vector& weights() const noexcept { return weights_; }
  Index size() const noexcept { return weights_.size(); }
  double operator[](Index i) const { return weights_[i]; }

  /// Indices carrying positive mass, ascending.
  IndexList support() const;
  bool has_full_support() const;
  Vector restricted(const IndexList& indices) const;

 private:
  Vector weights_;
};

/// Empirical measure of a sample of 0-based point indices.
Prob empirical_distribution(std::span<const Index> sample, Index n);

/// Empirical measure from occurrence counts.
Prob empirical_from_counts(std::span<const Index> counts);

/// Empirical q-quantile with linear interpolation between order statistics.
template <typename Derived>
typename Derived::Scalar quantile(const Eigen::DenseBase<Derived>& values,
                                  typename Derived::Scalar q) {
  using Scalar = typename Derived::Scalar;
  if (values.size() == 0) throw ConfigError("quantile of an empty set");
  if (!(q >= Scalar(0) && q <= Scalar(1))) throw ConfigError("quantile level outside [0, 1]");
  VectorX<Scalar> sorted(values.size());
  Index k = 0;
  for (Index i = 0; i < values.rows(); ++i)
    for (Index j = 0; j < values.cols(); ++j) sorted[k++] = values(i, j);
  std::sort(sorted.begin(), sorted.end());
  const Scalar h = q * Scalar(sorted.size() - 1);
  const auto lo = static_cast<Index>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted[sorted.size() - 1];
  return sorted[lo] + (h - Scalar(lo)) * (sorted[lo + 1] - sorted[lo]);
}

/// Quantile of the N^2 cost entries; q = 0.5 gives the median used to scale
/// the regularization parameter.
double cost_quantile(const CostVector& c, double q);

/// lambda = lambda0 * median cost.
double scaled_lambda(const CostVector& c, double lambda0);

/// Marginal constraint operator of a rows x cols plan in row-major
/// vectorization. The reduced form drops the constraint for the last column.
class ConstraintOperator {
 public:
  ConstraintOperator(Index rows, Index cols);
  explicit ConstraintOperator(Index n) : ConstraintOperator(n, n) {}

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  Index reduced_size() const noexcept { return rows_ + cols_ - 1; }
  Index plan_size() const noexcept { return rows_ * cols_; }

  /// [row sums; column sums]
  template <typename Derived>
  VectorX<typename Derived::Scalar> apply(const Eigen::MatrixBase<Derived>& plan) const {
    using Scalar = typename Derived::Scalar;
    check_plan(plan.size());
    const auto m = as_matrix(plan);
    VectorX<Scalar> out(rows_ + cols_);
    out.head(rows_) = m.rowwise().sum();
    out.tail(cols_) = m.colwise().sum().transpose();
    return out;
  }

  /// [row sums; column sums without the last one]
  template <typename Derived>
  VectorX<typename Derived::Scalar> apply_reduced(const Eigen::MatrixBase<Derived>& plan) const {
    return apply(plan).head(reduced_size());
  }

  /// (A* ^T mu)_(i,j) = mu_i + mu_(rows + j), with the last column term absent.
  template <typename Derived>
  VectorX<typename Derived::Scalar> apply_reduced_transpose(
      const Eigen::MatrixBase<Derived>& mu) const {
    using Scalar = typename Derived::Scalar;
    if (mu.size() != reduced_size()) throw ConfigError("dual vector has wrong length");
    VectorX<Scalar> out(plan_size());
    for (Index i = 0; i < rows_; ++i) {
      for (Index j = 0; j < cols_; ++j) {
        out[i * cols_ + j] = mu[i] + (j + 1 < cols_ ? mu[rows_ + j] : Scalar(0));
      }
    }
    return out;
  }

  /// Dense reduced operator, (rows + cols - 1) x (rows * cols).
  Matrix dense_reduced() const;

  /// A* diag(w) A*^T without forming A*: [diag(W 1), W_(:, :-1); W_(:, :-1)^T, diag(1^T W)_(:-1)]
  template <typename Derived>
  MatrixX<typename Derived::Scalar> weighted_gram(const Eigen::MatrixBase<Derived>& w) const {
    using Scalar = typename Derived::Scalar;
    check_plan(w.size());
    const auto m = as_matrix(w);
    const Index k = reduced_size();
    MatrixX<Scalar> gram = MatrixX<Scalar>::Zero(k, k);
    gram.topLeftCorner(rows_, rows_).diagonal() = m.rowwise().sum();
    gram.topRightCorner(rows_, cols_ - 1) = m.leftCols(cols_ - 1);
    gram.bottomLeftCorner(cols_ - 1, rows_) = m.leftCols(cols_ - 1).transpose();
    gram.bottomRightCorner(cols_ - 1, cols_ - 1).diagonal() =
        m.leftCols(cols_ - 1).colwise().sum().transpose();
    return gram;
  }

 private:
  void check_plan(Index size) const {
    if (size != plan_size()) throw ConfigError("plan has wrong length for constraint operator");
  }

  template <typename Derived>
  auto as_matrix(const Eigen::MatrixBase<Derived>& v) const {
    using Scalar = typename Derived::Scalar;
    return RowMatrixX<Scalar>(
        Eigen::Map<const RowMatrixX<Scalar>>(v.derived().eval().data(), rows_, cols_));
  }

  Index rows_;
  Index cols_;
};

}  // namespace rot
