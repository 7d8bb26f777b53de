#include "rot/inference.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "rot/parallel.hpp"

namespace rot {

namespace {

[[noreturn]] void rethrow_with_context(std::exception_ptr failure, const std::string& context) {
  try {
    std::rethrow_exception(failure);
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(context + ": " + e.what(), e.residual(), e.iterations());
  } catch (const DomainError& e) {
    throw DomainError(context + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": " + e.what());
  } catch (const Error& e) {
    throw NumericalError(context + ": " + e.what());
  }
}

struct ReplicateOutcome {
  double value = 0.0;
  double raw = 0.0;
};

// Runs `body(rng)` for every replicate with its own derived stream, keeps the
// results in replicate order and enforces the failure budget.
template <typename Body>
SampleDistribution run_replicates(Index replicates, std::uint64_t seed,
                                  const StatisticOptions& options, Body&& body) {
  if (replicates < 1) throw ConfigError("need at least one replicate");
  std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(replicates));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(replicates));
  parallel_for(replicates, options.threads, [&](Index k) {
    Rng rng = make_rng(seed, std::uint64_t(k));
    try {
      outcomes[std::size_t(k)] = body(rng);
    } catch (const Error&) {
      failures[std::size_t(k)] = std::current_exception();
    }
  });
  SampleDistribution out;
  out.seed = seed;
  out.values.reserve(std::size_t(replicates));
  out.raw.reserve(std::size_t(replicates));
  Index first_failure = -1;
  for (Index k = 0; k < replicates; ++k) {
    if (failures[std::size_t(k)]) {
      ++out.failures;
      if (first_failure < 0) first_failure = k;
      continue;
    }
    out.values.push_back(outcomes[std::size_t(k)].value);
    out.raw.push_back(outcomes[std::size_t(k)].raw);
  }
  if (double(out.failures) > options.max_failure_rate * double(replicates) ||
      out.values.empty()) {
    rethrow_with_context(failures[std::size_t(first_failure)],
                         "replicate " + std::to_string(first_failure) + " (" +
                             std::to_string(out.failures) + " of " +
                             std::to_string(replicates) + " failed)");
  }
  return out;
}

SolverOptions warm_from(const SolverOptions& base, const TransportPlan& plan) {
  SolverOptions out = base;
  out.warm_row = plan.full_row_potential();
  out.warm_col = plan.full_col_potential();
  return out;
}

double studentize(double raw, double variance) {
  if (variance > 0.0) return raw / std::sqrt(variance);
  if (raw == 0.0) return 0.0;
  throw NumericalError("plug-in variance vanishes at a non-degenerate statistic");
}

std::function<double(double)> normal_reference(double sd) {
  if (sd > 0.0) return [sd](double x) { return normal_cdf(x / sd); };
  return [](double x) { return x >= 0.0 ? 1.0 : 0.0; };
}

}  // namespace

std::string_view to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::mc:
      return "mc";
    case SampleKind::bootstrap:
      return "bootstrap";
    case SampleKind::gaussian_limit:
      return "gaussian_limit";
  }
  return "unknown";
}

Prob dirichlet_sample(double alpha, Index dim, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  return dirichlet(rng, alpha, dim);
}

SampleDistribution sinkhorn_statistic(const Prob& r, const Prob& s, const CostVector& c,
                                      double lambda, Index n, Index replicates,
                                      std::uint64_t seed, const StatisticOptions& options) {
  if (n < 1) throw ConfigError("sample size must be at least 1");
  const TransportPlan population = solve(options.reg, c, r, s, lambda, options.solver);
  const double reference = divergence(c, population);
  const SolverOptions solver = warm_from(options.solver, population);
  const double scale = std::sqrt(double(n));
  SampleDistribution out =
      run_replicates(replicates, seed, options, [&](Rng& rng) -> ReplicateOutcome {
        const Prob r_hat = multinomial_empirical(rng, r, n);
        const TransportPlan plan = solve(options.reg, c, r_hat, s, lambda, solver);
        ReplicateOutcome o;
        o.raw = scale * (divergence(c, plan) - reference);
        o.value = options.studentize
                      ? studentize(o.raw, divergence_variance(options.reg, plan, c,
                                                              SamplingMode::one_sample()))
                      : o.raw;
        return o;
      });
  out.kind = SampleKind::mc;
  out.n = n;
  out.studentized = options.studentize;
  return out;
}

SampleDistribution sinkhorn_statistic_two_sample(const Prob& r, const Prob& s,
                                                 const CostVector& c, double lambda, Index n,
                                                 Index m, Index replicates, std::uint64_t seed,
                                                 const StatisticOptions& options) {
  if (n < 1 || m < 1) throw ConfigError("sample sizes must be at least 1");
  const TransportPlan population = solve(options.reg, c, r, s, lambda, options.solver);
  const double reference = divergence(c, population);
  const SolverOptions solver = warm_from(options.solver, population);
  const double scale = std::sqrt(double(n) * double(m) / double(n + m));
  const SamplingMode mode = SamplingMode::from_sizes(n, m);
  SampleDistribution out =
      run_replicates(replicates, seed, options, [&](Rng& rng) -> ReplicateOutcome {
        const Prob r_hat = multinomial_empirical(rng, r, n);
        const Prob s_hat = multinomial_empirical(rng, s, m);
        const TransportPlan plan = solve(options.reg, c, r_hat, s_hat, lambda, solver);
        ReplicateOutcome o;
        o.raw = scale * (divergence(c, plan) - reference);
        o.value = options.studentize
                      ? studentize(o.raw, divergence_variance(options.reg, plan, c, mode))
                      : o.raw;
        return o;
      });
  out.kind = SampleKind::mc;
  out.n = n;
  out.m = m;
  out.studentized = options.studentize;
  return out;
}

SampleDistribution bootstrap_statistic(const Prob& r_hat, const Prob& s, const CostVector& c,
                                       double lambda, Index n, Index replicates,
                                       std::uint64_t seed, const StatisticOptions& options) {
  if (n < 1) throw ConfigError("sample size must be at least 1");
  const TransportPlan base = solve(options.reg, c, r_hat, s, lambda, options.solver);
  const double reference = divergence(c, base);
  const SolverOptions solver = warm_from(options.solver, base);
  const double scale = std::sqrt(double(n));
  SampleDistribution out =
      run_replicates(replicates, seed, options, [&](Rng& rng) -> ReplicateOutcome {
        const Prob r_star = multinomial_empirical(rng, r_hat, n);
        const TransportPlan plan = solve(options.reg, c, r_star, s, lambda, solver);
        ReplicateOutcome o;
        o.raw = scale * (divergence(c, plan) - reference);
        o.value = o.raw;
        return o;
      });
  out.kind = SampleKind::bootstrap;
  out.n = n;
  out.studentized = false;
  return out;
}

Matrix gaussian_limit_sample(const LimitLawSampler& sampler, Index draws, std::uint64_t seed,
                             unsigned threads) {
  if (draws < 1) throw ConfigError("need at least one draw");
  Matrix out(sampler.plan_size(), draws);
  parallel_for(draws, threads, [&](Index k) {
    Rng rng = make_rng(seed, std::uint64_t(k));
    out.col(k) = sampler.draw(rng);
  });
  return out;
}

double ks_distance(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw ConfigError("KS distance of an empty sample");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = double(sorted.size());
  double out = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    out = std::max({out, double(i + 1) / n - f, f - double(i) / n});
  }
  return out;
}

double ks_distance_normal(std::span<const double> sample, double sd) {
  return ks_distance(sample, normal_reference(sd));
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ConfigError("KS distance of an empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::size_t i = 0;
  std::size_t j = 0;
  double out = 0.0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= t) ++i;
    while (j < y.size() && y[j] <= t) ++j;
    out = std::max(out, std::abs(double(i) / double(x.size()) - double(j) / double(y.size())));
  }
  return out;
}

ConfidenceInterval limit_ci(const Regularizer& reg, const CostVector& c, const Prob& r_hat,
                            const Prob& s, double lambda, Index n, double alpha,
                            const SolverOptions& solver) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (n < 1) throw ConfigError("sample size must be at least 1");
  const TransportPlan plan = solve(reg, c, r_hat, s, lambda, solver);
  ConfidenceInterval out;
  out.alpha = alpha;
  out.estimate = divergence(c, plan);
  out.sigma = std::sqrt(divergence_variance(reg, plan, c, SamplingMode::one_sample()));
  const double half = normal_quantile(1.0 - alpha / 2.0) * out.sigma / std::sqrt(double(n));
  out.lower = out.estimate - half;
  out.upper = out.estimate + half;
  return out;
}

ConfidenceInterval limit_ci_two_sample(const Regularizer& reg, const CostVector& c,
                                       const Prob& r_hat, const Prob& s_hat, double lambda,
                                       Index n, Index m, double alpha,
                                       const SolverOptions& solver) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (n < 1 || m < 1) throw ConfigError("sample sizes must be at least 1");
  const TransportPlan plan = solve(reg, c, r_hat, s_hat, lambda, solver);
  ConfidenceInterval out;
  out.alpha = alpha;
  out.estimate = divergence(c, plan);
  out.sigma = std::sqrt(divergence_variance(reg, plan, c, SamplingMode::from_sizes(n, m)));
  const double scale = std::sqrt(double(n) * double(m) / double(n + m));
  const double half = normal_quantile(1.0 - alpha / 2.0) * out.sigma / scale;
  out.lower = out.estimate - half;
  out.upper = out.estimate + half;
  return out;
}

std::string_view to_string(MCMode mode) {
  switch (mode) {
    case MCMode::one_sample_eq:
      return "one_sample_eq";
    case MCMode::one_sample_neq:
      return "one_sample_neq";
    case MCMode::two_sample:
      return "two_sample";
  }
  return "unknown";
}

MCMode parse_mc_mode(std::string_view text) {
  if (text == "one_sample_eq") return MCMode::one_sample_eq;
  if (text == "one_sample_neq") return MCMode::one_sample_neq;
  if (text == "two_sample") return MCMode::two_sample;
  throw ConfigError("unknown mc mode '" + std::string(text) + "'");
}

MCReport mc_experiment(const MCConfig& config) {
  if (config.replicates < 1) throw ConfigError("replicates must be at least 1");
  if (config.n.empty()) throw ConfigError("mc config needs at least one sample size");
  if (!config.lambda_kappa && config.lambda0.empty())
    throw ConfigError("mc config needs lambda0 values or a kappa preset");
  for (const double l : config.lambda0)
    if (!(l > 0.0)) throw ConfigError("lambda0 must be positive");

  const CostVector c =
      cost_from_metric(build_grid_space(config.grid, config.extent), config.p, config.metric);
  const Index size = c.size();
  const Prob r = dirichlet_sample(config.dirichlet_alpha, size, derive_seed(config.seed, 0));
  const Prob s = config.mode == MCMode::one_sample_eq
                     ? r
                     : dirichlet_sample(config.dirichlet_alpha, size, derive_seed(config.seed, 1));

  if (config.compare_ot_limit) {
    if (config.mode != MCMode::one_sample_eq || config.p != 1.0)
      throw ConfigError("the unregularized limit comparison needs one_sample_eq and p = 1");
    if (size > 6) throw ConfigError("the unregularized limit comparison needs N <= 6");
  }
  std::vector<Vector> vertices;
  if (config.compare_ot_limit) vertices = exact_ot_baseline(c, r, r).dual_vertices;

  // (lambda0, n) cells in config order
  std::vector<std::pair<double, Index>> grid;
  if (config.lambda_kappa) {
    for (const Index n : config.n) {
      if (n < 2) throw ConfigError("the kappa preset needs n >= 2");
      grid.emplace_back(*config.lambda_kappa / std::log(std::sqrt(double(n))), n);
    }
  } else {
    for (const double l : config.lambda0)
      for (const Index n : config.n) grid.emplace_back(l, n);
  }

  StatisticOptions options;
  options.reg = config.reg;
  options.solver.tol = config.tol;
  options.threads = config.threads;
  options.studentize = config.studentize;
  options.max_failure_rate = 0.01;

  MCReport report{config, r, s, {}};
  for (std::size_t cell_index = 0; cell_index < grid.size(); ++cell_index) {
    const auto [lambda0, n] = grid[cell_index];
    if (n < 1) throw ConfigError("sample sizes must be at least 1");
    MCCell cell;
    cell.lambda0 = lambda0;
    cell.lambda = scaled_lambda(c, lambda0);
    cell.n = n;
    const std::uint64_t cell_seed = derive_seed(config.seed, 100 + cell_index);
    SamplingMode mode = SamplingMode::one_sample();
    try {
      if (config.mode == MCMode::two_sample) {
        cell.m = n;
        mode = SamplingMode::from_sizes(n, n);
        cell.sample = sinkhorn_statistic_two_sample(r, s, c, cell.lambda, n, n,
                                                    config.replicates, cell_seed, options);
      } else {
        cell.sample =
            sinkhorn_statistic(r, s, c, cell.lambda, n, config.replicates, cell_seed, options);
      }
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("mc cell lambda0=" + std::to_string(lambda0) +
                                 " n=" + std::to_string(n) + ": " + e.what(),
                             e.residual(), e.iterations());
    }
    const TransportPlan population = solve(config.reg, c, r, s, cell.lambda, options.solver);
    cell.sigma = std::sqrt(divergence_variance(config.reg, population, c, mode));
    cell.ks_gaussian_limit = ks_distance_normal(cell.sample.raw, cell.sigma);
    cell.ks_reference = config.studentize ? ks_distance_normal(cell.sample.values)
                                          : cell.ks_gaussian_limit;
    if (config.compare_ot_limit) {
      const std::vector<double> limit = ot_limit_sample(c, r, vertices, config.ot_limit_draws,
                                                        derive_seed(cell_seed, 7));
      cell.ks_ot_limit = ks_two_sample(cell.sample.raw, limit);
    }
    std::vector<double> sorted = cell.sample.values;
    std::sort(sorted.begin(), sorted.end());
    cell.qq.reserve(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const double level = (double(i) + 0.5) / double(sorted.size());
      cell.qq.emplace_back(normal_quantile(level), sorted[i]);
    }
    report.cells.push_back(std::move(cell));
  }
  return report;
}

}  // namespace rot
