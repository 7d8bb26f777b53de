#include "rot/space.hpp"

#include <string>

namespace rot {

GroundSpace::GroundSpace(Matrix points) : points_(std::move(points)) {
  if (points_.rows() < 1) throw ConfigError("ground space needs at least one point");
  if (!points_.allFinite()) throw ConfigError("ground space coordinates must be finite");
}

GroundSpace build_grid_space(Index side, double extent) {
  if (side < 1) throw ConfigError("grid side must be at least 1");
  if (!(extent > 0.0)) throw ConfigError("grid extent must be positive");
  const double step = side > 1 ? extent / double(side - 1) : 0.0;
  Matrix points(side * side, 2);
  for (Index a = 0; a < side; ++a) {
    for (Index b = 0; b < side; ++b) {
      points(a * side + b, 0) = double(a) * step;
      points(a * side + b, 1) = double(b) * step;
    }
  }
  return GroundSpace(std::move(points));
}

GroundSpace build_pixel_grid(Index width, Index height, double pixel_size) {
  if (width < 1 || height < 1) throw ConfigError("pixel grid needs positive dimensions");
  if (!(pixel_size > 0.0)) throw ConfigError("pixel size must be positive");
  Matrix points(width * height, 2);
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      points(y * width + x, 0) = double(x) * pixel_size;
      points(y * width + x, 1) = double(y) * pixel_size;
    }
  }
  return GroundSpace(std::move(points));
}

Metric parse_metric(std::string_view name) {
  if (name == "euclidean") return Metric::euclidean;
  if (name == "sqeuclidean" || name == "squared_euclidean") return Metric::squared_euclidean;
  throw ConfigError("unknown metric '" + std::string(name) + "'");
}

std::string_view to_string(Metric metric) {
  return metric == Metric::euclidean ? "euclidean" : "sqeuclidean";
}

CostVector::CostVector(Vector entries, double p) : entries_(std::move(entries)), p_(p) {
  const auto n = static_cast<Index>(std::llround(std::sqrt(double(entries_.size()))));
  if (n < 1 || n * n != entries_.size()) throw ConfigError("cost vector length is not a square");
  if (!(p >= 1.0)) throw ConfigError("cost power p must be at least 1");
  if (!entries_.allFinite() || entries_.minCoeff() < 0.0)
    throw ConfigError("cost entries must be finite and nonnegative");
  n_ = n;
  c_max_ = entries_.maxCoeff();
}

CostVector CostVector::from_table(const Matrix& table, double p) {
  if (table.rows() != table.cols()) throw ConfigError("cost table must be square");
  Vector entries(table.size());
  for (Index i = 0; i < table.rows(); ++i)
    for (Index j = 0; j < table.cols(); ++j) entries[i * table.cols() + j] = table(i, j);
  return CostVector(std::move(entries), p);
}

RowMatrix CostVector::matrix() const {
  return Eigen::Map<const RowMatrix>(entries_.data(), n_, n_);
}

RowMatrix CostVector::submatrix(const IndexList& rows, const IndexList& cols) const {
  RowMatrix out(Index(rows.size()), Index(cols.size()));
  for (Index a = 0; a < out.rows(); ++a) {
    for (Index b = 0; b < out.cols(); ++b) {
      const Index i = rows[std::size_t(a)];
      const Index j = cols[std::size_t(b)];
      if (i < 0 || i >= n_ || j < 0 || j >= n_) throw ConfigError("cost index out of range");
      out(a, b) = entries_[i * n_ + j];
    }
  }
  return out;
}

CostVector cost_from_metric(const GroundSpace& space, double p, Metric metric) {
  const Index n = space.size();
  const Matrix& x = space.points();
  Vector entries(n * n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const double sq = (x.row(i) - x.row(j)).squaredNorm();
      const double d = metric == Metric::euclidean ? std::sqrt(sq) : sq;
      entries[i * n + j] = p == 1.0 ? d : std::pow(d, p);
    }
  }
  return CostVector(std::move(entries), p);
}

Prob::Prob(Vector weights, bool renormalize) : weights_(std::move(weights)) {
  if (weights_.size() < 1) throw ConfigError("probability vector is empty");
  if (!weights_.allFinite() || weights_.minCoeff() < 0.0)
    throw ConfigError("probability weights must be finite and nonnegative");
  const double total = weights_.sum();
  if (renormalize) {
    if (!(total > 0.0)) throw ConfigError("cannot renormalize a zero vector");
    weights_ /= total;
  } else if (std::abs(total - 1.0) > kTolerance) {
    throw ConfigError("probability weights sum to " + std::to_string(total) + ", not 1");
  }
}

Prob Prob::uniform(Index n) {
  if (n < 1) throw ConfigError("uniform distribution needs n >= 1");
  return Prob(Vector::Constant(n, 1.0 / double(n)), true);
}

Prob Prob::dirac(Index n, Index at) {
  if (at < 0 || at >= n) throw ConfigError("Dirac location out of range");
  Vector w = Vector::Zero(n);
  w[at] = 1.0;
  return Prob(std::move(w));
}

IndexList Prob::support() const {
  IndexList out;
  for (Index i = 0; i < weights_.size(); ++i)
    if (weights_[i] > 0.0) out.push_back(i);
  return out;
}

bool Prob::has_full_support() const { return weights_.minCoeff() > 0.0; }

Vector Prob::restricted(const IndexList& indices) const {
  Vector out(Index(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) out[Index(k)] = weights_[indices[k]];
  return out;
}

Prob empirical_distribution(std::span<const Index> sample, Index n) {
  if (sample.empty()) throw ConfigError("empirical distribution of an empty sample");
  if (n < 1) throw ConfigError("empirical distribution needs n >= 1");
  Vector w = Vector::Zero(n);
  for (const Index i : sample) {
    if (i < 0 || i >= n) throw ConfigError("sample index " + std::to_string(i) + " out of range");
    w[i] += 1.0;
  }
  return Prob(w / double(sample.size()), true);
}

Prob empirical_from_counts(std::span<const Index> counts) {
  Vector w(Index(counts.size()));
  Index total = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < 0) throw ConfigError("negative count");
    w[Index(k)] = double(counts[k]);
    total += counts[k];
  }
  if (total == 0) throw ConfigError("empirical distribution of an empty sample");
  return Prob(w / double(total), true);
}

double cost_quantile(const CostVector& c, double q) { return quantile(c.entries(), q); }

double scaled_lambda(const CostVector& c, double lambda0) {
  if (!(lambda0 > 0.0)) throw ConfigError("lambda0 must be positive");
  const double median = cost_quantile(c, 0.5);
  if (!(median > 0.0)) throw ConfigError("median cost is zero; pass an absolute lambda");
  return lambda0 * median;
}

ConstraintOperator::ConstraintOperator(Index rows, Index cols) : rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1) throw ConfigError("constraint operator needs positive dimensions");
}

Matrix ConstraintOperator::dense_reduced() const {
  Matrix a = Matrix::Zero(reduced_size(), plan_size());
  for (Index i = 0; i < rows_; ++i) {
    for (Index j = 0; j < cols_; ++j) {
      a(i, i * cols_ + j) = 1.0;
      if (j + 1 < cols_) a(rows_ + j, i * cols_ + j) = 1.0;
    }
  }
  return a;
}

}  // namespace rot
