#pragma once

#include <optional>

#include "rot/random.hpp"
#include "rot/solver.hpp"

namespace rot {

/// Sigma(r) = diag(r) - r r^T.
Matrix multinomial_cov(const Vector& r);
inline Matrix multinomial_cov(const Prob& r) { return multinomial_cov(r.weights()); }

/// Derivative of the plan map with respect to the reduced marginals
/// [r; s without its last entry], evaluated on the support block of `plan`.
/// Rows follow the row-major order of the block, so the matrix is
/// (M K) x (M + K - 1) for an M x K support.
struct SensitivityResult {
  Matrix grad_phi;
  Index rows = 0;
  Index cols = 0;

  auto grad_phi_r() const { return grad_phi.leftCols(rows); }
};

SensitivityResult plan_gradient(const Regularizer& reg, const TransportPlan& plan);
inline SensitivityResult plan_gradient(const TransportPlan& plan) {
  return plan_gradient(plan.regularizer(), plan);
}

/// Matrix-free form of the plan gradient:
///   apply(x)           = W A*^T Q^{-1} x
///   apply_transpose(y) = Q^{-1} A* W y
/// with W the inverse Hessian diagonal and Q = A* W A*^T factored once.
class SensitivityOperator {
 public:
  SensitivityOperator(const Regularizer& reg, const RowMatrix& block);

  Index rows() const noexcept { return op_.rows(); }
  Index cols() const noexcept { return op_.cols(); }
  Index plan_size() const noexcept { return op_.plan_size(); }
  Index reduced_size() const noexcept { return op_.reduced_size(); }

  Vector apply(const Vector& x) const;
  Vector apply_transpose(const Vector& y) const;
  /// Q^{-1} applied to a block of right-hand sides.
  Matrix solve(const Matrix& rhs) const;
  const Vector& weights() const noexcept { return weights_; }

 private:
  ConstraintOperator op_;
  Vector weights_;
  Eigen::LLT<Matrix> llt_;
};

/// Which marginals are random. Two-sample weights follow sample sizes n (for
/// r) and m (for s) with delta = m / (n + m); the plan fluctuation is scaled by
/// sqrt(n m / (n + m)). The deleted coordinate is always the last entry of s.
struct SamplingMode {
  enum class Kind { one_sample, two_sample };
  Kind kind = Kind::one_sample;
  double delta = 1.0;

  static SamplingMode one_sample() { return {Kind::one_sample, 1.0}; }
  static SamplingMode two_sample(double delta);
  static SamplingMode from_sizes(Index n, Index m) {
    return two_sample(double(m) / double(n + m));
  }
  bool is_two_sample() const noexcept { return kind == Kind::two_sample; }
};

/// Covariance of the Gaussian marginal fluctuation in reduced coordinates:
/// Sigma(r) padded with zeros (one sample) or
/// blockdiag(delta Sigma(r), (1 - delta) Sigma(s)_*) (two samples), with
/// Sigma(s)_* the leading principal block of Sigma(s). Marginals are restricted
/// to the support of `plan`.
Matrix marginal_noise_cov(const TransportPlan& plan, SamplingMode mode);

/// Plan covariance is materialized only up to this many plan entries.
inline constexpr Index kMaxMaterializedPlan = 64 * 64;

struct CovarianceResult {
  /// (M K) x (M K) limit covariance of the plan on its support; empty when
  /// the support is too large or materialization was not requested.
  std::optional<Matrix> sigma_plan;
  double sigma_divergence = 0.0;
  SamplingMode mode;
};

/// Limit covariance of the plan and variance of the divergence.
CovarianceResult plan_covariance(const Regularizer& reg, const TransportPlan& plan,
                                 const CostVector& c, SamplingMode mode,
                                 bool materialize = true);

/// gamma = (1/p) <c, plan>^(1/p - 1) c on the support block.
Vector divergence_gradient(const TransportPlan& plan, const CostVector& c);

/// gamma^T Sigma gamma for a materialized plan covariance.
double divergence_variance(const TransportPlan& plan, const CostVector& c,
                           const Matrix& sigma_plan);

/// Same quantity through the gradient action, O((M + K)^3) without Sigma.
double divergence_variance(const Regularizer& reg, const TransportPlan& plan,
                           const CostVector& c, SamplingMode mode);

/// First M columns of [A* D A*^T]^{-1} for the entropic plan, D = diag(plan),
/// by block inversion of [R, P; P^T, S*] with R and S* the row and leading
/// column sums of the plan and P the plan without its last column.
Matrix entropy_block_schur(const TransportPlan& plan);

/// Variance alpha^T Sigma(r) alpha of the limit of the regularized objective.
double objective_variance(const DualPotentials& potentials, const Prob& r);

/// Draws from the Gaussian limit of the plan without materializing its
/// covariance: a multinomial-covariance draw of the marginal noise is pushed
/// through the gradient action.
class LimitLawSampler {
 public:
  LimitLawSampler(const Regularizer& reg, const TransportPlan& plan, SamplingMode mode);

  Index plan_size() const noexcept { return op_.plan_size(); }
  const SensitivityOperator& gradient() const noexcept { return op_; }
  Vector draw(Rng& rng) const;

 private:
  SensitivityOperator op_;
  Vector r_;
  Vector s_;
  SamplingMode mode_;
};

}  // namespace rot
