#include "rot/random.hpp"

#include <cmath>
#include <limits>

namespace rot {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer applied to the seed and then to the stream
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

Vector standard_normal(Rng& rng, Index n) {
  std::normal_distribution<double> normal;
  Vector z(n);
  for (Index k = 0; k < n; ++k) z[k] = normal(rng);
  return z;
}

std::vector<Index> multinomial_counts(Rng& rng, const Vector& prob, Index n) {
  if (n < 0) throw ConfigError("multinomial draw count must be nonnegative");
  std::vector<Index> counts(std::size_t(prob.size()), 0);
  Index remaining = n;
  double mass = prob.sum();
  for (Index k = 0; k < prob.size() && remaining > 0; ++k) {
    if (k + 1 == prob.size()) {
      counts[std::size_t(k)] = remaining;
      break;
    }
    const double q = mass > 0.0 ? std::clamp(prob[k] / mass, 0.0, 1.0) : 0.0;
    std::binomial_distribution<Index> binomial(remaining, q);
    const Index drawn = q > 0.0 ? binomial(rng) : 0;
    counts[std::size_t(k)] = drawn;
    remaining -= drawn;
    mass -= prob[k];
  }
  return counts;
}

Prob multinomial_empirical(Rng& rng, const Prob& prob, Index n) {
  if (n < 1) throw ConfigError("resampling needs n >= 1");
  return empirical_from_counts(multinomial_counts(rng, prob.weights(), n));
}

Prob dirichlet(Rng& rng, double alpha, Index dim) {
  if (!(alpha > 0.0)) throw ConfigError("Dirichlet concentration must be positive");
  if (dim < 1) throw ConfigError("Dirichlet dimension must be at least 1");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  Vector w(dim);
  // redraw in the (astronomically unlikely) event of an all-zero vector
  do {
    for (Index k = 0; k < dim; ++k) w[k] = gamma(rng);
  } while (!(w.sum() > 0.0));
  return Prob(w, true);
}

Vector multinomial_gaussian(Rng& rng, const Vector& r) {
  const Vector root = r.cwiseSqrt();
  const Vector z = standard_normal(rng, r.size());
  return root.cwiseProduct(z) - r * root.dot(z);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    if (u == 0.0) return -std::numeric_limits<double>::infinity();
    if (u == 1.0) return std::numeric_limits<double>::infinity();
    throw ConfigError("normal quantile level outside [0, 1]");
  }
  double lo = -40.0;
  double hi = 40.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < u ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  const double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  if (density > 1e-300) x -= (normal_cdf(x) - u) / density;
  return x;
}

}  // namespace rot
