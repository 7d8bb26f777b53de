#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "rot/sensitivity.hpp"
#include "rot/solver.hpp"

namespace rot {

/// Nonnegative intensities on a width x height pixel grid, row-major
/// (pixel (x, y) at y * width + x).
struct IntensityImage {
  Index width = 0;
  Index height = 0;
  double pixel_size = 1.0;
  Vector intensities;
};

/// Pixel grid scaled by the pixel size and the normalized intensities.
std::pair<GroundSpace, Prob> image_to_distribution(const IntensityImage& image);

/// Sum of isotropic Gaussian blobs on a constant background, for phantoms.
struct Blob {
  double x = 0.0;
  double y = 0.0;
  double sigma = 1.0;
  double amplitude = 1.0;
};
IntensityImage blob_image(Index width, Index height, double pixel_size,
                          const std::vector<Blob>& blobs, double background = 0.0);

/// Empirical measure of n i.i.d. draws from `prob`.
Prob resample_distribution(const Prob& prob, Index n, std::uint64_t seed);

/// Sorted distinct thresholds. Values closer than 1e-12 relative are merged.
class ThresholdGrid {
 public:
  explicit ThresholdGrid(std::vector<double> values);
  /// Distinct entries of a cost vector, the points where RCol can jump.
  static ThresholdGrid from_costs(const CostVector& c);
  static ThresholdGrid merge(const ThresholdGrid& a, const ThresholdGrid& b);

  const std::vector<double>& values() const noexcept { return values_; }
  Index size() const noexcept { return Index(values_.size()); }
  /// Index of the first threshold t with cost <= t, or size() if none.
  Index bin(double cost) const;

 private:
  std::vector<double> values_;
};

struct Band {
  Vector lower;
  Vector upper;
  double alpha = 0.05;
  /// Quantile of the supremum statistic.
  double quantile = 0.0;
  double half_width = 0.0;
};

/// Right-continuous step curve t -> mass transported at cost <= t.
struct RColCurve {
  std::vector<double> thresholds;
  Vector values;
  std::optional<Band> band;

  /// Step evaluation at any t (0 left of the first threshold).
  double at(double t) const;
  /// The curve on another grid by step evaluation.
  Vector on_grid(const ThresholdGrid& grid) const;
};

/// RCol as a linear map from plan block entries to curve values.
class RColMap {
 public:
  RColMap(const TransportPlan& plan, const CostVector& c, ThresholdGrid grid);

  const ThresholdGrid& grid() const noexcept { return grid_; }
  /// Cumulative mass per threshold for a vector over the plan support block.
  Vector apply(const Vector& block_entries) const;

 private:
  ThresholdGrid grid_;
  std::vector<Index> bins_;
};

/// RCol of a plan; thresholds default to the distinct cost values.
RColCurve rcol(const TransportPlan& plan, const CostVector& c,
               const std::optional<std::vector<double>>& thresholds = std::nullopt);

struct GaussianBandOptions {
  double alpha = 0.05;
  Index draws = 2000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Uniform band from the Gaussian limit at `plan`. With m unset the band is
/// one-sample (only r random, half-width u / sqrt(n)); otherwise two-sample
/// with half-width u sqrt((n + m) / (n m)), i.e. sqrt(2) u / sqrt(n) for m = n.
RColCurve rcol_cb_gaussian(const Regularizer& reg, const TransportPlan& plan,
                           const CostVector& c, Index n, std::optional<Index> m,
                           const GaussianBandOptions& options);

struct BootstrapBandOptions {
  double alpha = 0.05;
  Index replicates = 100;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  SolverOptions solver;
  /// Fraction of replicates allowed to fail.
  double max_failure_rate = 0.05;
};

struct BootstrapRCol {
  RColCurve curve;
  /// Replicate curves as columns, on curve.thresholds.
  Matrix replicates;
  /// Per replicate: 1 if it solved.
  std::vector<char> succeeded;
  Index failures = 0;
  Index n = 0;
};

/// Two-sample bootstrap band at (r_hat, s_hat), both empirical with n points.
BootstrapRCol rcol_cb_bootstrap(const Regularizer& reg, const Prob& r_hat, const Prob& s_hat,
                                const CostVector& c, double lambda, Index n,
                                const BootstrapBandOptions& options);

/// Difference a - b on the union grid with a band from index-paired replicates.
RColCurve rcol_diff(const BootstrapRCol& a, const BootstrapRCol& b, double alpha);

}  // namespace rot
