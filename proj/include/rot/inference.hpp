#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rot/sensitivity.hpp"
#include "rot/solver.hpp"

namespace rot {

enum class SampleKind { mc, bootstrap, gaussian_limit };

std::string_view to_string(SampleKind kind);

/// Replicated statistic. `values` is what the caller asked for (studentized
/// when requested); `raw` always holds the unstudentized, sqrt-scaled
/// differences. Failed replicates are excluded from both and counted.
struct SampleDistribution {
  std::vector<double> values;
  std::vector<double> raw;
  SampleKind kind = SampleKind::mc;
  Index n = 0;
  Index m = 0;
  std::uint64_t seed = 0;
  Index failures = 0;
  bool studentized = false;
};

struct StatisticOptions {
  Regularizer reg = Regularizer::entropy();
  SolverOptions solver;
  unsigned threads = 1;
  bool studentize = true;
  /// Fraction of replicates allowed to fail before the call throws.
  double max_failure_rate = 0.0;
};

/// Dirichlet(alpha, ..., alpha) draw on the dim-simplex.
Prob dirichlet_sample(double alpha, Index dim, std::uint64_t seed);

/// sqrt(n) {W(r_n, s) - W(r, s)} over replicates of an n-sample from r,
/// divided by the plug-in standard deviation at (r_n, s) when studentizing.
SampleDistribution sinkhorn_statistic(const Prob& r, const Prob& s, const CostVector& c,
                                      double lambda, Index n, Index replicates,
                                      std::uint64_t seed, const StatisticOptions& options = {});

/// sqrt(n m / (n + m)) {W(r_n, s_m) - W(r, s)}, studentized with the
/// two-sample plug-in variance at delta = m / (n + m).
SampleDistribution sinkhorn_statistic_two_sample(const Prob& r, const Prob& s,
                                                 const CostVector& c, double lambda, Index n,
                                                 Index m, Index replicates, std::uint64_t seed,
                                                 const StatisticOptions& options = {});

/// sqrt(n) {W(r*_n, s) - W(r_hat, s)} with r*_n an n-out-of-n resample of
/// r_hat. Never studentized.
SampleDistribution bootstrap_statistic(const Prob& r_hat, const Prob& s, const CostVector& c,
                                       double lambda, Index n, Index replicates,
                                       std::uint64_t seed, const StatisticOptions& options = {});

/// Columns are independent draws from the Gaussian limit of the plan.
Matrix gaussian_limit_sample(const LimitLawSampler& sampler, Index draws, std::uint64_t seed,
                             unsigned threads = 1);

/// sup |F_n - F| for a continuous reference cdf F.
double ks_distance(std::span<const double> sample, const std::function<double(double)>& cdf);
double ks_distance_normal(std::span<const double> sample, double sd = 1.0);
/// sup |F_a - F_b| between two empirical cdfs.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

struct ConfidenceInterval {
  double estimate = 0.0;
  double sigma = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.05;
};

/// W -/+ z_{1-alpha/2} sigma / sqrt(n) from the limit law at (r_hat, s).
ConfidenceInterval limit_ci(const Regularizer& reg, const CostVector& c, const Prob& r_hat,
                            const Prob& s, double lambda, Index n, double alpha,
                            const SolverOptions& solver = {});

/// Two-sample interval at (r_hat, s_hat) with scaling sqrt(n m / (n + m)).
ConfidenceInterval limit_ci_two_sample(const Regularizer& reg, const CostVector& c,
                                       const Prob& r_hat, const Prob& s_hat, double lambda,
                                       Index n, Index m, double alpha,
                                       const SolverOptions& solver = {});

enum class MCMode { one_sample_eq, one_sample_neq, two_sample };

std::string_view to_string(MCMode mode);
MCMode parse_mc_mode(std::string_view text);

struct MCConfig {
  Index grid = 4;
  double extent = 1.0;
  Metric metric = Metric::euclidean;
  double p = 1.0;
  std::vector<double> lambda0 = {2.0};
  std::vector<Index> n = {25};
  Index replicates = 20000;
  double dirichlet_alpha = 1.0;
  std::uint64_t seed = 0;
  MCMode mode = MCMode::one_sample_eq;
  bool studentize = true;
  Regularizer reg = Regularizer::entropy();
  /// Compare with the unregularized limit law (one_sample_eq, p = 1, N <= 6).
  bool compare_ot_limit = false;
  Index ot_limit_draws = 100000;
  /// When set, lambda0 = kappa / log(sqrt(n)) per sample size instead of the list.
  std::optional<double> lambda_kappa;
  double tol = 1e-9;
  unsigned threads = 1;
};

struct MCCell {
  double lambda0 = 0.0;
  double lambda = 0.0;
  Index n = 0;
  Index m = 0;
  /// Limit standard deviation at the population marginals.
  double sigma = 0.0;
  /// KS of `values` to N(0, 1) if studentized, else to N(0, sigma^2).
  double ks_reference = 0.0;
  /// KS of `raw` to N(0, sigma^2).
  double ks_gaussian_limit = 0.0;
  std::optional<double> ks_ot_limit;
  SampleDistribution sample;
  /// (theoretical normal quantile, sorted statistic) pairs.
  std::vector<std::pair<double, double>> qq;
};

struct MCReport {
  MCConfig config;
  Prob r;
  Prob s;
  std::vector<MCCell> cells;
};

/// Simulation harness over the (lambda0, n) grid. Each cell fails if more than
/// 1% of its replicates fail.
MCReport mc_experiment(const MCConfig& config);

}  // namespace rot
