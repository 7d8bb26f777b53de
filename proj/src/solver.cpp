#include "rot/solver.hpp"

#include <cmath>
#include <limits>

namespace rot {

namespace {

// scalings are folded into the potentials once they leave [1/kAbsorb, kAbsorb]
constexpr double kAbsorb = 1e20;
// a kernel product below this is treated as underflow and redone in log domain
constexpr double kUnderflow = 1e-200;

void check_block_problem(const RowMatrix& cost, const Vector& r, const Vector& s, double lambda) {
  if (cost.rows() != r.size() || cost.cols() != s.size())
    throw ConfigError("cost block does not match marginal sizes");
  if (cost.rows() < 1 || cost.cols() < 1) throw ConfigError("empty transport problem");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive");
  if (r.minCoeff() <= 0.0 || s.minCoeff() <= 0.0)
    throw ReductionRequired("marginals must be strictly positive; solve on the support");
}

double log_sum_exp(const Eigen::Ref<const Vector>& x) {
  const double top = x.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((x.array() - top).exp().sum());
}

// Residual of a plan against both marginals.
double marginal_residual(const RowMatrix& plan, const Vector& r, const Vector& s) {
  const double rows = (plan.rowwise().sum() - r).lpNorm<Eigen::Infinity>();
  const double cols = (plan.colwise().sum().transpose() - s).lpNorm<Eigen::Infinity>();
  return std::max(rows, cols);
}

class StabilizedSinkhorn {
 public:
  StabilizedSinkhorn(const RowMatrix& cost, const Vector& r, const Vector& s, double lambda)
      : cost_(cost), r_(r), s_(s), lambda_(lambda) {}

  BlockSolution run(const SolverOptions& options) {
    initialize(options);
    BlockSolution out;
    Index it = 0;
    double residual = std::numeric_limits<double>::infinity();
    while (it < options.max_iter) {
      ++it;
      Vector kv = kernel_ * v_;
      if (it > 1) {
        // columns are exact after the previous v-update; rows are checked here
        residual = (u_.cwiseProduct(kv) - r_).lpNorm<Eigen::Infinity>();
        if (residual <= options.tol) {
          out.converged = true;
          break;
        }
      }
      if (!(kv.minCoeff() > kUnderflow) || !kv.allFinite()) {
        log_row_update();
      } else {
        u_ = r_.cwiseQuotient(kv);
      }
      Vector ktu = kernel_.transpose() * u_;
      if (!(ktu.minCoeff() > kUnderflow) || !ktu.allFinite()) {
        log_col_update();
      } else {
        v_ = s_.cwiseQuotient(ktu);
      }
      if (u_.maxCoeff() > kAbsorb || v_.maxCoeff() > kAbsorb || u_.minCoeff() < 1.0 / kAbsorb ||
          v_.minCoeff() < 1.0 / kAbsorb) {
        absorb();
      }
    }
    out.plan = u_.asDiagonal() * kernel_ * v_.asDiagonal();
    if (!out.plan.allFinite()) throw NumericalError("Sinkhorn produced a non-finite plan");
    out.row_potential = f_ + lambda_ * u_.array().log().matrix();
    out.col_potential = g_ + lambda_ * v_.array().log().matrix();
    const double last = out.col_potential[out.col_potential.size() - 1];
    out.row_potential.array() += last;
    out.col_potential.array() -= last;
    out.diagnostics.iterations = it;
    out.diagnostics.residual = marginal_residual(out.plan, r_, s_);
    out.diagnostics.method = "sinkhorn";
    if (out.converged && out.diagnostics.residual > options.tol) {
      // the cheap row check passed but rounding left the columns outside tol
      out.converged = false;
    }
    return out;
  }

 private:
  void initialize(const SolverOptions& options) {
    const Index m = cost_.rows();
    const Index k = cost_.cols();
    if (options.warm_row && options.warm_col && options.warm_row->size() == m &&
        options.warm_col->size() == k && options.warm_row->allFinite() &&
        options.warm_col->allFinite()) {
      f_ = *options.warm_row;
      g_ = *options.warm_col;
    } else {
      f_ = cost_.rowwise().minCoeff();
      g_ = (cost_.colwise() - f_).colwise().minCoeff().transpose();
    }
    u_ = Vector::Ones(m);
    v_ = Vector::Ones(k);
    rebuild();
  }

  void rebuild() {
    kernel_ = ((-cost_).colwise() + f_).rowwise() + g_.transpose();
    kernel_ = (kernel_.array() / lambda_).exp().matrix();
  }

  void absorb() {
    f_ += lambda_ * u_.array().log().matrix();
    g_ += lambda_ * v_.array().log().matrix();
    u_.setOnes();
    v_.setOnes();
    rebuild();
  }

  void log_row_update() {
    absorb();
    for (Index i = 0; i < cost_.rows(); ++i) {
      const Vector z = (g_ - cost_.row(i).transpose()) / lambda_;
      f_[i] = lambda_ * (std::log(r_[i]) - log_sum_exp(z));
    }
    rebuild();
  }

  void log_col_update() {
    absorb();
    for (Index j = 0; j < cost_.cols(); ++j) {
      const Vector z = (f_ - cost_.col(j)) / lambda_;
      g_[j] = lambda_ * (std::log(s_[j]) - log_sum_exp(z));
    }
    rebuild();
  }

  const RowMatrix& cost_;
  const Vector& r_;
  const Vector& s_;
  double lambda_;
  Vector f_, g_, u_, v_;
  RowMatrix kernel_;
};

Vector flatten(const RowMatrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

RowMatrix unflatten(const Vector& v, Index rows, Index cols) {
  return Eigen::Map<const RowMatrix>(v.data(), rows, cols);
}

std::optional<Vector> restrict_warm(const std::optional<Vector>& full, const IndexList& idx,
                                    Index n) {
  if (!full || full->size() != n) return std::nullopt;
  Vector out(Index(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[Index(k)] = (*full)[idx[k]];
  // the last support column carries the normalization
  return out;
}

void check_problem(const CostVector& c, const Prob& r, const Prob& s, double lambda) {
  if (c.size() != r.size() || c.size() != s.size())
    throw ConfigError("cost, r and s dimensions differ");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive");
}

IndexList all_indices(Index n) {
  IndexList out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out[std::size_t(i)] = i;
  return out;
}

}  // namespace

BlockSolution sinkhorn_block(const RowMatrix& cost, const Vector& r, const Vector& s,
                             double lambda, const SolverOptions& options) {
  check_block_problem(cost, r, s, lambda);
  return StabilizedSinkhorn(cost, r, s, lambda).run(options);
}

BlockSolution newton_block(const Regularizer& reg, const RowMatrix& cost, const Vector& r,
                           const Vector& s, double lambda, const SolverOptions& options) {
  check_block_problem(cost, r, s, lambda);
  const Index m = cost.rows();
  const Index k = cost.cols();
  // A single support cell carries mass 1, outside the open Fermi-Dirac domain.
  if (reg.kind == RegKind::fermi_dirac && m * k == 1)
    throw DomainError("Fermi-Dirac plan needs at least two support cells");
  const ConstraintOperator op(m, k);
  Vector b(op.reduced_size());
  b << r, s.head(k - 1);

  // A constant cost shift leaves the plan unchanged and moves the starting
  // point mu = 0 into the conjugate domain.
  Vector c = flatten(cost);
  double shift = 0.0;
  if (!in_conjugate_domain(reg, Vector(-c / lambda))) {
    const double spread = c.maxCoeff() - c.minCoeff();
    shift = (spread > 0.0 ? spread : 1.0) - c.minCoeff();
    c.array() += shift;
  }

  Vector mu = Vector::Zero(op.reduced_size());
  if (options.warm_row && options.warm_col && options.warm_row->size() == m &&
      options.warm_col->size() == k) {
    const double last = (*options.warm_col)[k - 1];
    Vector warm(op.reduced_size());
    warm << options.warm_row->array() + last + shift,
        options.warm_col->head(k - 1).array() - last;
    if (warm.allFinite() && in_conjugate_domain(reg, Vector((op.apply_reduced_transpose(warm) - c) / lambda)))
      mu = warm;
  }

  auto dual_point = [&](const Vector& dual) { return Vector((op.apply_reduced_transpose(dual) - c) / lambda); };

  Vector y = dual_point(mu);
  Vector plan = conjugate_grad(reg, y);
  Vector residual = b - op.apply_reduced(plan);
  double objective = mu.dot(b) - lambda * conjugate_value(reg, y);

  // The dropped column sum is checked too, so the stopping rule bounds every marginal.
  auto full_norm = [&](const Vector& p, const Vector& reduced) {
    const double last_col = p(Eigen::seqN(k - 1, m, k)).sum();
    return std::max(reduced.lpNorm<Eigen::Infinity>(), std::abs(s[k - 1] - last_col));
  };

  BlockSolution out;
  Index it = 0;
  double res_norm = full_norm(plan, residual);
  while (res_norm > options.tol) {
    if (it >= options.max_newton_iter)
      throw ConvergenceError("Newton dual solver did not converge", res_norm, it);
    ++it;
    const Vector weights = inverse_hess_diag(
        reg, Vector(plan.cwiseMax(std::numeric_limits<double>::min())));
    const Matrix gram = op.weighted_gram(weights);
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) throw NumericalError("Newton system is not positive definite");
    const Vector step = lambda * llt.solve(residual);
    const double slope = residual.dot(step);

    double t = 1.0;
    for (;;) {
      const Vector trial = mu + t * step;
      const Vector trial_y = dual_point(trial);
      if (in_conjugate_domain(reg, trial_y)) {
        const Vector trial_plan = conjugate_grad(reg, trial_y);
        const Vector trial_res = b - op.apply_reduced(trial_plan);
        const double trial_obj = trial.dot(b) - lambda * conjugate_value(reg, trial_y);
        const double trial_norm = full_norm(trial_plan, trial_res);
        if (std::isfinite(trial_obj) &&
            (trial_obj >= objective + 1e-4 * t * slope || trial_norm < res_norm)) {
          mu = trial;
          y = trial_y;
          plan = trial_plan;
          residual = trial_res;
          objective = trial_obj;
          res_norm = trial_norm;
          break;
        }
      }
      t *= 0.5;
      if (t < 1e-14) throw ConvergenceError("Newton line search step underflow", res_norm, it);
    }
  }

  out.plan = unflatten(plan, m, k);
  out.row_potential = mu.head(m).array() - shift;
  out.col_potential = Vector::Zero(k);
  out.col_potential.head(k - 1) = mu.tail(k - 1);
  out.converged = true;
  out.diagnostics.iterations = it;
  out.diagnostics.residual = marginal_residual(out.plan, r, s);
  out.diagnostics.method = "newton";
  return out;
}

TransportPlan::TransportPlan(BlockSolution solution, IndexList rows, IndexList cols, Prob r,
                             Prob s, double lambda, Regularizer reg)
    : block_(std::move(solution.plan)),
      row_potential_(std::move(solution.row_potential)),
      col_potential_(std::move(solution.col_potential)),
      rows_(std::move(rows)),
      cols_(std::move(cols)),
      r_(std::move(r)),
      s_(std::move(s)),
      lambda_(lambda),
      reg_(reg),
      diagnostics_(std::move(solution.diagnostics)) {
  if (block_.rows() != Index(rows_.size()) || block_.cols() != Index(cols_.size()))
    throw ConfigError("plan block does not match its support");
}

Vector TransportPlan::block_entries() const { return flatten(block_); }

Vector TransportPlan::entries() const {
  const RowMatrix full = matrix();
  return flatten(full);
}

RowMatrix TransportPlan::matrix() const {
  RowMatrix full = RowMatrix::Zero(size(), size());
  for (std::size_t a = 0; a < rows_.size(); ++a)
    for (std::size_t b = 0; b < cols_.size(); ++b)
      full(rows_[a], cols_[b]) = block_(Index(a), Index(b));
  return full;
}

Vector TransportPlan::full_row_potential() const {
  Vector out = Vector::Zero(size());
  for (std::size_t a = 0; a < rows_.size(); ++a) out[rows_[a]] = row_potential_[Index(a)];
  return out;
}

Vector TransportPlan::full_col_potential() const {
  Vector out = Vector::Zero(size());
  for (std::size_t b = 0; b < cols_.size(); ++b) out[cols_[b]] = col_potential_[Index(b)];
  return out;
}

TransportPlan sinkhorn_entropy(const CostVector& c, const Prob& r, const Prob& s, double lambda,
                               const SolverOptions& options) {
  check_problem(c, r, s, lambda);
  if (!r.has_full_support() || !s.has_full_support())
    throw ReductionRequired("marginals have zero entries; use solve() for index reduction");
  BlockSolution sol = sinkhorn_block(c.matrix(), r.weights(), s.weights(), lambda, options);
  if (!sol.converged)
    throw ConvergenceError("Sinkhorn did not converge", sol.diagnostics.residual,
                           sol.diagnostics.iterations);
  const Index n = c.size();
  return TransportPlan(std::move(sol), all_indices(n), all_indices(n), r, s, lambda,
                       Regularizer::entropy());
}

TransportPlan solve_general(const Regularizer& reg, const CostVector& c, const Prob& r,
                            const Prob& s, double lambda, const SolverOptions& options) {
  check_problem(c, r, s, lambda);
  if (!r.has_full_support() || !s.has_full_support())
    throw ReductionRequired("marginals have zero entries; use solve() for index reduction");
  BlockSolution sol = newton_block(reg, c.matrix(), r.weights(), s.weights(), lambda, options);
  const Index n = c.size();
  return TransportPlan(std::move(sol), all_indices(n), all_indices(n), r, s, lambda, reg);
}

TransportPlan solve(const Regularizer& reg, const CostVector& c, const Prob& r, const Prob& s,
                    double lambda, const SolverOptions& options) {
  check_problem(c, r, s, lambda);
  IndexList rows = r.support();
  IndexList cols = s.support();
  const RowMatrix block = c.submatrix(rows, cols);
  const Vector rr = r.restricted(rows);
  const Vector ss = s.restricted(cols);

  SolverOptions local = options;
  local.warm_row = restrict_warm(options.warm_row, rows, c.size());
  local.warm_col = restrict_warm(options.warm_col, cols, c.size());

  BlockSolution sol;
  if (reg.kind == RegKind::entropy) {
    sol = sinkhorn_block(block, rr, ss, lambda, local);
    if (!sol.converged) {
      const Index sweeps = sol.diagnostics.iterations;
      local.warm_row = sol.row_potential;
      local.warm_col = sol.col_potential;
      sol = newton_block(reg, block, rr, ss, lambda, local);
      sol.diagnostics.iterations += sweeps;
      sol.diagnostics.method = "sinkhorn+newton";
    }
  } else {
    sol = newton_block(reg, block, rr, ss, lambda, local);
  }
  return TransportPlan(std::move(sol), std::move(rows), std::move(cols), r, s, lambda, reg);
}

double transport_cost(const CostVector& c, const TransportPlan& plan) {
  if (c.size() != plan.size()) throw ConfigError("cost and plan dimensions differ");
  return c.submatrix(plan.rows(), plan.cols()).cwiseProduct(plan.block()).sum();
}

double divergence(const CostVector& c, const TransportPlan& plan) {
  const double cost = transport_cost(c, plan);
  return c.p() == 1.0 ? cost : std::pow(cost, 1.0 / c.p());
}

double regularized_objective(const CostVector& c, const TransportPlan& plan) {
  return transport_cost(c, plan) + plan.lambda() * value(plan.regularizer(), plan.block_entries());
}

DualPotentials dual_potentials(const TransportPlan& plan, const CostVector& c) {
  if (plan.regularizer().kind != RegKind::entropy)
    throw UnsupportedError("dual potentials are only defined for the entropic plan");
  if (c.size() != plan.size()) throw ConfigError("cost and plan dimensions differ");
  const RowMatrix block = plan.block();
  if (block.minCoeff() <= 0.0) throw NumericalError("plan has non-positive entries on its support");
  const RowMatrix logits =
      c.submatrix(plan.rows(), plan.cols()) + plan.lambda() * block.array().log().matrix();
  const Index k = logits.cols();
  DualPotentials out;
  out.alpha = logits.col(k - 1);
  out.beta = (logits.colwise() - out.alpha).colwise().mean().transpose();
  out.rows = plan.rows();
  out.cols = plan.cols();
  const RowMatrix rebuilt = (RowMatrix::Zero(logits.rows(), k).colwise() + out.alpha).rowwise() +
                            out.beta.transpose();
  const double scale = std::max(1.0, logits.cwiseAbs().maxCoeff());
  const double residual = (rebuilt - logits).cwiseAbs().maxCoeff();
  if (residual > 1e-6 * scale)
    throw NumericalError("plan is not of additive form in log space (residual " +
                         std::to_string(residual) + ")");
  return out;
}

}  // namespace rot
