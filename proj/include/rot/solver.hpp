#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rot/regularizer.hpp"
#include "rot/space.hpp"

namespace rot {

struct SolverOptions {
  /// Stop once the max-abs marginal residual is at most `tol`.
  double tol = 1e-9;
  Index max_iter = 100000;
  /// Newton iteration cap; each step costs one dense factorization.
  Index max_newton_iter = 500;
  /// Optional full-length (N) row and column potentials used as a starting
  /// point. Entries outside the solved support are ignored.
  std::optional<Vector> warm_row;
  std::optional<Vector> warm_col;
};

struct SolveDiagnostics {
  Index iterations = 0;
  double residual = 0.0;
  /// "sinkhorn", "newton" or "sinkhorn+newton".
  std::string method;
};

/// Solution of a regularized transport problem on a rectangular block.
/// `plan(i, j) = conj_grad((row_potential_i + col_potential_j - cost_ij) / lambda)`
/// with the last column potential fixed at 0.
struct BlockSolution {
  RowMatrix plan;
  Vector row_potential;
  Vector col_potential;
  SolveDiagnostics diagnostics;
  bool converged = false;
};

/// Stabilized Sinkhorn scaling for the entropic problem on an M x K block
/// with strictly positive marginals. Never throws on non-convergence; check
/// `converged`.
BlockSolution sinkhorn_block(const RowMatrix& cost, const Vector& r, const Vector& s,
                             double lambda, const SolverOptions& options = {});

/// Damped Newton ascent on the reduced dual for any proper regularizer.
/// Throws ConvergenceError when the iteration cap is hit or the step underflows.
BlockSolution newton_block(const Regularizer& reg, const RowMatrix& cost, const Vector& r,
                           const Vector& s, double lambda, const SolverOptions& options = {});

/// Regularized plan on the full N x N space. Zero-mass rows and columns are
/// carried as index lists; `block()` holds the strictly positive plan on the
/// support.
class TransportPlan {
 public:
  TransportPlan(BlockSolution solution, IndexList rows, IndexList cols, Prob r, Prob s,
                double lambda, Regularizer reg);

  Index size() const noexcept { return r_.size(); }
  const RowMatrix& block() const noexcept { return block_; }
  const IndexList& rows() const noexcept { return rows_; }
  const IndexList& cols() const noexcept { return cols_; }
  bool is_reduced() const noexcept { return block_.rows() != size() || block_.cols() != size(); }

  const Prob& r() const noexcept { return r_; }
  const Prob& s() const noexcept { return s_; }
  double lambda() const noexcept { return lambda_; }
  const Regularizer& regularizer() const noexcept { return reg_; }
  const SolveDiagnostics& diagnostics() const noexcept { return diagnostics_; }

  /// Block plan vectorized row-major.
  Vector block_entries() const;
  /// Full length-N^2 plan with zero rows and columns re-embedded.
  Vector entries() const;
  /// Full N x N plan.
  RowMatrix matrix() const;

  /// Potentials on the support (sizes M and K, last column potential 0).
  const Vector& row_potential() const noexcept { return row_potential_; }
  const Vector& col_potential() const noexcept { return col_potential_; }
  /// Length-N potentials with 0 outside the support, suitable as warm start.
  Vector full_row_potential() const;
  Vector full_col_potential() const;

 private:
  RowMatrix block_;
  Vector row_potential_;
  Vector col_potential_;
  IndexList rows_;
  IndexList cols_;
  Prob r_;
  Prob s_;
  double lambda_;
  Regularizer reg_;
  SolveDiagnostics diagnostics_;
};

/// Entropic plan by stabilized Sinkhorn. Requires strictly positive marginals
/// (throws ReductionRequired otherwise) and throws ConvergenceError after
/// `max_iter` sweeps.
TransportPlan sinkhorn_entropy(const CostVector& c, const Prob& r, const Prob& s, double lambda,
                               const SolverOptions& options = {});

/// Newton dual solver for any regularizer; strictly positive marginals required.
TransportPlan solve_general(const Regularizer& reg, const CostVector& c, const Prob& r,
                            const Prob& s, double lambda, const SolverOptions& options = {});

/// Front end: drops zero-mass points, solves on the support (Sinkhorn with a
/// Newton fallback for entropy, Newton otherwise) and records the embedding.
TransportPlan solve(const Regularizer& reg, const CostVector& c, const Prob& r, const Prob& s,
                    double lambda, const SolverOptions& options = {});

/// <c, plan>, the transport cost of the plan.
double transport_cost(const CostVector& c, const TransportPlan& plan);

/// <c, plan>^(1/p).
double divergence(const CostVector& c, const TransportPlan& plan);

/// <c, plan> + lambda f(plan), the regularized objective.
double regularized_objective(const CostVector& c, const TransportPlan& plan);

/// Potentials with alpha_i + beta_j = c_ij + lambda log plan_ij on the support,
/// beta fixed to 0 at the last support column.
struct DualPotentials {
  Vector alpha;
  Vector beta;
  IndexList rows;
  IndexList cols;
};

DualPotentials dual_potentials(const TransportPlan& plan, const CostVector& c);

struct ExactTransport {
  double value = 0.0;
  /// Optimal dual basic solutions (u, v) of length 2N, normalized to v_N = 0.
  std::vector<Vector> dual_vertices;
};

/// Unregularized optimum by enumerating spanning-tree bases of the
/// transportation polytope. N <= 6.
ExactTransport exact_ot_baseline(const CostVector& c, const Prob& r, const Prob& s);

/// Draws of (max over optimal duals u of <G, u_r>)^(1/p) with G ~ N(0, Sigma(r)).
/// The root is applied with the sign of its argument.
std::vector<double> ot_limit_sample(const CostVector& c, const Prob& r,
                                    const std::vector<Vector>& dual_vertices, Index draws,
                                    std::uint64_t seed);

}  // namespace rot
