#include "rot/coloc.hpp"

#include <algorithm>
#include <cmath>

#include "rot/parallel.hpp"

namespace rot {

namespace {

constexpr double kMergeTolerance = 1e-12;

bool same_threshold(double a, double b) {
  return std::abs(a - b) <= kMergeTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

Vector clip(const Vector& v, double lo, double hi) { return v.cwiseMax(lo).cwiseMin(hi); }

Band symmetric_band(const Vector& values, double alpha, double quantile, double half_width,
                    double lo, double hi) {
  Band band;
  band.alpha = alpha;
  band.quantile = quantile;
  band.half_width = half_width;
  band.lower = clip(values.array() - half_width, lo, hi);
  band.upper = clip(values.array() + half_width, lo, hi);
  return band;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
}

}  // namespace

std::pair<GroundSpace, Prob> image_to_distribution(const IntensityImage& image) {
  if (image.width < 1 || image.height < 1) throw ConfigError("image has no pixels");
  if (image.intensities.size() != image.width * image.height)
    throw ConfigError("image intensity count does not match its dimensions");
  if (!image.intensities.allFinite() || image.intensities.minCoeff() < 0.0)
    throw ConfigError("image intensities must be finite and nonnegative");
  if (!(image.intensities.sum() > 0.0)) throw ConfigError("image has zero total intensity");
  return {build_pixel_grid(image.width, image.height, image.pixel_size),
          Prob(image.intensities, true)};
}

IntensityImage blob_image(Index width, Index height, double pixel_size,
                          const std::vector<Blob>& blobs, double background) {
  if (width < 1 || height < 1) throw ConfigError("image needs positive dimensions");
  IntensityImage image{width, height, pixel_size, Vector::Constant(width * height, background)};
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      for (const Blob& blob : blobs) {
        const double d2 = std::pow(double(x) - blob.x, 2) + std::pow(double(y) - blob.y, 2);
        image.intensities[y * width + x] +=
            blob.amplitude * std::exp(-0.5 * d2 / (blob.sigma * blob.sigma));
      }
    }
  }
  return image;
}

Prob resample_distribution(const Prob& prob, Index n, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  return multinomial_empirical(rng, prob, n);
}

ThresholdGrid::ThresholdGrid(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  for (const double v : values) {
    if (!std::isfinite(v)) throw ConfigError("thresholds must be finite");
    if (values_.empty() || !same_threshold(values_.back(), v)) values_.push_back(v);
  }
  if (values_.empty()) throw ConfigError("threshold grid is empty");
}

ThresholdGrid ThresholdGrid::from_costs(const CostVector& c) {
  const Vector& e = c.entries();
  return ThresholdGrid(std::vector<double>(e.data(), e.data() + e.size()));
}

ThresholdGrid ThresholdGrid::merge(const ThresholdGrid& a, const ThresholdGrid& b) {
  std::vector<double> all = a.values_;
  all.insert(all.end(), b.values_.begin(), b.values_.end());
  return ThresholdGrid(std::move(all));
}

Index ThresholdGrid::bin(double cost) const {
  auto it = std::lower_bound(values_.begin(), values_.end(), cost);
  if (it != values_.begin() && same_threshold(*(it - 1), cost)) --it;
  return Index(it - values_.begin());
}

double RColCurve::at(double t) const {
  const auto it = std::upper_bound(thresholds.begin(), thresholds.end(), t);
  if (it == thresholds.begin()) return 0.0;
  return values[Index(it - thresholds.begin()) - 1];
}

Vector RColCurve::on_grid(const ThresholdGrid& grid) const {
  Vector out(grid.size());
  for (Index k = 0; k < grid.size(); ++k) out[k] = at(grid.values()[std::size_t(k)]);
  return out;
}

RColMap::RColMap(const TransportPlan& plan, const CostVector& c, ThresholdGrid grid)
    : grid_(std::move(grid)) {
  if (c.size() != plan.size()) throw ConfigError("cost and plan dimensions differ");
  const RowMatrix block = c.submatrix(plan.rows(), plan.cols());
  bins_.resize(std::size_t(block.size()));
  for (Index e = 0; e < block.size(); ++e) bins_[std::size_t(e)] = grid_.bin(block.data()[e]);
}

Vector RColMap::apply(const Vector& block_entries) const {
  if (block_entries.size() != Index(bins_.size()))
    throw ConfigError("plan entries do not match the curve map");
  Vector mass = Vector::Zero(grid_.size() + 1);
  for (std::size_t e = 0; e < bins_.size(); ++e) mass[bins_[e]] += block_entries[Index(e)];
  Vector out(grid_.size());
  double running = 0.0;
  for (Index k = 0; k < grid_.size(); ++k) {
    running += mass[k];
    out[k] = running;
  }
  return out;
}

RColCurve rcol(const TransportPlan& plan, const CostVector& c,
               const std::optional<std::vector<double>>& thresholds) {
  ThresholdGrid grid = thresholds ? ThresholdGrid(*thresholds) : ThresholdGrid::from_costs(c);
  const RColMap map(plan, c, std::move(grid));
  RColCurve out;
  out.thresholds = map.grid().values();
  // rounding in the plan can push the cumulative mass a hair past 1
  out.values = map.apply(plan.block_entries()).cwiseMin(1.0).cwiseMax(0.0);
  return out;
}

RColCurve rcol_cb_gaussian(const Regularizer& reg, const TransportPlan& plan,
                           const CostVector& c, Index n, std::optional<Index> m,
                           const GaussianBandOptions& options) {
  check_alpha(options.alpha);
  if (n < 1 || (m && *m < 1)) throw ConfigError("sample sizes must be at least 1");
  if (double(options.draws) < 1.0 / options.alpha)
    throw ConfigError("too few Gaussian draws for the requested quantile level");
  const SamplingMode mode = m ? SamplingMode::from_sizes(n, *m) : SamplingMode::one_sample();
  const LimitLawSampler sampler(reg, plan, mode);
  const RColMap map(plan, c, ThresholdGrid::from_costs(c));

  Vector sups(options.draws);
  parallel_for(options.draws, options.threads, [&](Index k) {
    Rng rng = make_rng(options.seed, std::uint64_t(k));
    sups[k] = map.apply(sampler.draw(rng)).cwiseAbs().maxCoeff();
  });
  const double u = quantile(sups, 1.0 - options.alpha);
  const double half = m ? u * std::sqrt(double(n + *m) / (double(n) * double(*m)))
                        : u / std::sqrt(double(n));

  RColCurve out = rcol(plan, c);
  out.band = symmetric_band(out.values, options.alpha, u, half, 0.0, 1.0);
  return out;
}

BootstrapRCol rcol_cb_bootstrap(const Regularizer& reg, const Prob& r_hat, const Prob& s_hat,
                                const CostVector& c, double lambda, Index n,
                                const BootstrapBandOptions& options) {
  check_alpha(options.alpha);
  if (n < 1) throw ConfigError("sample size must be at least 1");
  if (options.replicates < 1) throw ConfigError("need at least one bootstrap replicate");
  const TransportPlan base = solve(reg, c, r_hat, s_hat, lambda, options.solver);
  BootstrapRCol out;
  out.n = n;
  out.curve = rcol(base, c);
  const ThresholdGrid grid(out.curve.thresholds);

  SolverOptions solver = options.solver;
  solver.warm_row = base.full_row_potential();
  solver.warm_col = base.full_col_potential();

  const Index count = options.replicates;
  out.replicates = Matrix::Zero(grid.size(), count);
  out.succeeded.assign(std::size_t(count), 0);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  parallel_for(count, options.threads, [&](Index k) {
    Rng rng = make_rng(options.seed, std::uint64_t(k));
    const Prob r_star = multinomial_empirical(rng, r_hat, n);
    const Prob s_star = multinomial_empirical(rng, s_hat, n);
    try {
      const TransportPlan plan = solve(reg, c, r_star, s_star, lambda, solver);
      out.replicates.col(k) = rcol(plan, c, grid.values()).values;
      out.succeeded[std::size_t(k)] = 1;
    } catch (const Error&) {
      errors[std::size_t(k)] = std::current_exception();
    }
  });

  std::vector<double> sups;
  const double scale = std::sqrt(double(n) / 2.0);
  for (Index k = 0; k < count; ++k) {
    if (!out.succeeded[std::size_t(k)]) {
      ++out.failures;
      continue;
    }
    sups.push_back(scale * (out.replicates.col(k) - out.curve.values).cwiseAbs().maxCoeff());
  }
  if (double(out.failures) > options.max_failure_rate * double(count) || sups.empty()) {
    throw ConvergenceError("bootstrap band: " + std::to_string(out.failures) + " of " +
                               std::to_string(count) + " replicates failed",
                           std::numeric_limits<double>::quiet_NaN(), 0);
  }
  const double u = quantile(Eigen::Map<const Vector>(sups.data(), Index(sups.size())),
                            1.0 - options.alpha);
  const double half = std::sqrt(2.0) * u / std::sqrt(double(n));
  out.curve.band = symmetric_band(out.curve.values, options.alpha, u, half, 0.0, 1.0);
  return out;
}

RColCurve rcol_diff(const BootstrapRCol& a, const BootstrapRCol& b, double alpha) {
  check_alpha(alpha);
  if (a.n != b.n) throw ConfigError("difference bands need equal resampling sizes");
  if (a.replicates.cols() != b.replicates.cols())
    throw ConfigError("difference bands need the same number of bootstrap replicates");
  const ThresholdGrid grid = ThresholdGrid::merge(ThresholdGrid(a.curve.thresholds),
                                                  ThresholdGrid(b.curve.thresholds));
  RColCurve out;
  out.thresholds = grid.values();
  out.values = a.curve.on_grid(grid) - b.curve.on_grid(grid);

  const double scale = std::sqrt(double(a.n) / 2.0);
  std::vector<double> sups;
  for (Index k = 0; k < a.replicates.cols(); ++k) {
    if (!a.succeeded[std::size_t(k)] || !b.succeeded[std::size_t(k)]) continue;
    RColCurve ra{a.curve.thresholds, a.replicates.col(k), std::nullopt};
    RColCurve rb{b.curve.thresholds, b.replicates.col(k), std::nullopt};
    const Vector diff = ra.on_grid(grid) - rb.on_grid(grid);
    sups.push_back(scale * (diff - out.values).cwiseAbs().maxCoeff());
  }
  if (sups.empty()) throw ConfigError("no replicate pair succeeded in both settings");
  const double u = quantile(Eigen::Map<const Vector>(sups.data(), Index(sups.size())), 1.0 - alpha);
  const double half = std::sqrt(2.0) * u / std::sqrt(double(a.n));
  out.band = symmetric_band(out.values, alpha, u, half, -1.0, 1.0);
  return out;
}

}  // namespace rot
