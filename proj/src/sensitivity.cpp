#include "rot/sensitivity.hpp"

#include <cmath>

namespace rot {

Matrix multinomial_cov(const Vector& r) {
  Matrix out = -r * r.transpose();
  out.diagonal() += r;
  return out;
}

SensitivityOperator::SensitivityOperator(const Regularizer& reg, const RowMatrix& block)
    : op_(block.rows(), block.cols()) {
  const Vector entries = Eigen::Map<const Vector>(block.data(), block.size());
  weights_ = inverse_hess_diag(reg, entries);
  llt_.compute(op_.weighted_gram(weights_));
  if (llt_.info() != Eigen::Success)
    throw NumericalError("sensitivity system is not numerically positive definite");
}

Vector SensitivityOperator::apply(const Vector& x) const {
  if (x.size() != reduced_size()) throw ConfigError("sensitivity input has wrong length");
  const Vector z = llt_.solve(x);
  return weights_.cwiseProduct(op_.apply_reduced_transpose(z));
}

Vector SensitivityOperator::apply_transpose(const Vector& y) const {
  if (y.size() != plan_size()) throw ConfigError("sensitivity input has wrong length");
  return llt_.solve(op_.apply_reduced(weights_.cwiseProduct(y)));
}

Matrix SensitivityOperator::solve(const Matrix& rhs) const { return llt_.solve(rhs); }

SensitivityResult plan_gradient(const Regularizer& reg, const TransportPlan& plan) {
  const SensitivityOperator op(reg, plan.block());
  const Index m = op.rows();
  const Index k = op.cols();
  const Matrix q_inv = op.solve(Matrix::Identity(op.reduced_size(), op.reduced_size()));
  SensitivityResult out;
  out.rows = m;
  out.cols = k;
  out.grad_phi.resize(op.plan_size(), op.reduced_size());
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < k; ++j) {
      const Index e = i * k + j;
      // row e of A*^T picks dual coordinates i and m + j (absent for j = k - 1)
      out.grad_phi.row(e) = q_inv.row(i);
      if (j + 1 < k) out.grad_phi.row(e) += q_inv.row(m + j);
      out.grad_phi.row(e) *= op.weights()[e];
    }
  }
  if (!out.grad_phi.allFinite()) throw NumericalError("plan gradient is not finite");
  return out;
}

SamplingMode SamplingMode::two_sample(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("two-sample weight delta must lie in (0, 1)");
  return {Kind::two_sample, delta};
}

Matrix marginal_noise_cov(const TransportPlan& plan, SamplingMode mode) {
  const Index m = Index(plan.rows().size());
  const Index k = Index(plan.cols().size());
  Matrix out = Matrix::Zero(m + k - 1, m + k - 1);
  const Matrix sigma_r = multinomial_cov(plan.r().restricted(plan.rows()));
  if (!mode.is_two_sample()) {
    out.topLeftCorner(m, m) = sigma_r;
    return out;
  }
  const Matrix sigma_s = multinomial_cov(plan.s().restricted(plan.cols()));
  out.topLeftCorner(m, m) = mode.delta * sigma_r;
  out.bottomRightCorner(k - 1, k - 1) = (1.0 - mode.delta) * sigma_s.topLeftCorner(k - 1, k - 1);
  return out;
}

Vector divergence_gradient(const TransportPlan& plan, const CostVector& c) {
  const RowMatrix block = c.submatrix(plan.rows(), plan.cols());
  Vector gamma = Eigen::Map<const Vector>(block.data(), block.size());
  if (c.p() == 1.0) return gamma;
  const double inner = transport_cost(c, plan);
  if (!(inner > 0.0))
    throw NumericalError("divergence is not differentiable at zero transport cost for p > 1");
  gamma *= std::pow(inner, 1.0 / c.p() - 1.0) / c.p();
  return gamma;
}

double divergence_variance(const TransportPlan& plan, const CostVector& c,
                           const Matrix& sigma_plan) {
  const Vector gamma = divergence_gradient(plan, c);
  if (sigma_plan.rows() != gamma.size() || sigma_plan.cols() != gamma.size())
    throw ConfigError("plan covariance does not match the plan support");
  return std::max(0.0, gamma.dot(sigma_plan * gamma));
}

double divergence_variance(const Regularizer& reg, const TransportPlan& plan,
                           const CostVector& c, SamplingMode mode) {
  const SensitivityOperator op(reg, plan.block());
  const Vector y = op.apply_transpose(divergence_gradient(plan, c));
  return std::max(0.0, y.dot(marginal_noise_cov(plan, mode) * y));
}

CovarianceResult plan_covariance(const Regularizer& reg, const TransportPlan& plan,
                                 const CostVector& c, SamplingMode mode, bool materialize) {
  CovarianceResult out;
  out.mode = mode;
  const Matrix noise = marginal_noise_cov(plan, mode);
  const SensitivityOperator op(reg, plan.block());
  const Vector y = op.apply_transpose(divergence_gradient(plan, c));
  out.sigma_divergence = std::max(0.0, y.dot(noise * y));
  if (materialize && op.plan_size() <= kMaxMaterializedPlan) {
    const SensitivityResult grad = plan_gradient(reg, plan);
    Matrix sigma = grad.grad_phi * noise * grad.grad_phi.transpose();
    out.sigma_plan = 0.5 * (sigma + sigma.transpose());
  }
  return out;
}

Matrix entropy_block_schur(const TransportPlan& plan) {
  if (plan.regularizer().kind != RegKind::entropy)
    throw UnsupportedError("block-Schur inversion applies to the entropic plan only");
  const RowMatrix& pi = plan.block();
  const Index m = pi.rows();
  const Index k = pi.cols();
  const Vector row_sums = pi.rowwise().sum();
  const Vector col_sums = pi.leftCols(k - 1).colwise().sum().transpose();
  if (k > 1 && col_sums.minCoeff() <= 0.0)
    throw ReductionRequired("column marginal has zero entries; solve on the support");
  const Matrix partial = pi.leftCols(k - 1);
  const Vector inv_s = col_sums.cwiseInverse();
  Matrix schur = -partial * inv_s.asDiagonal() * partial.transpose();
  schur.diagonal() += row_sums;
  const Matrix top = schur.llt().solve(Matrix::Identity(m, m));
  Matrix out(m + k - 1, m);
  out.topRows(m) = top;
  out.bottomRows(k - 1) = -(inv_s.asDiagonal() * (partial.transpose() * top));
  return out;
}

double objective_variance(const DualPotentials& potentials, const Prob& r) {
  const Vector rr = r.restricted(potentials.rows);
  const Vector& alpha = potentials.alpha;
  if (alpha.size() != rr.size()) throw ConfigError("potentials do not match the marginal");
  // alpha^T (diag(r) - r r^T) alpha
  return std::max(0.0, rr.dot(alpha.cwiseAbs2()) - std::pow(rr.dot(alpha), 2));
}

LimitLawSampler::LimitLawSampler(const Regularizer& reg, const TransportPlan& plan,
                                 SamplingMode mode)
    : op_(reg, plan.block()),
      r_(plan.r().restricted(plan.rows())),
      s_(plan.s().restricted(plan.cols())),
      mode_(mode) {}

Vector LimitLawSampler::draw(Rng& rng) const {
  const Index m = r_.size();
  const Index k = s_.size();
  Vector noise = Vector::Zero(m + k - 1);
  if (!mode_.is_two_sample()) {
    noise.head(m) = multinomial_gaussian(rng, r_);
  } else {
    noise.head(m) = std::sqrt(mode_.delta) * multinomial_gaussian(rng, r_);
    noise.tail(k - 1) = std::sqrt(1.0 - mode_.delta) * multinomial_gaussian(rng, s_).head(k - 1);
  }
  return op_.apply(noise);
}

}  // namespace rot
