#pragma once

#include <cstdint>
#include <random>

#include "rot/space.hpp"

namespace rot {

using Rng = std::mt19937_64;

/// Mixes a base seed with a stream index; replicate k of a seeded task uses
/// derive_seed(seed, k) so results do not depend on scheduling.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

Vector standard_normal(Rng& rng, Index n);

/// Occurrence counts of n i.i.d. draws from `prob`.
std::vector<Index> multinomial_counts(Rng& rng, const Vector& prob, Index n);

/// Empirical measure of n i.i.d. draws from `prob`.
Prob multinomial_empirical(Rng& rng, const Prob& prob, Index n);

/// Exchangeable Dirichlet(alpha, ..., alpha) draw.
Prob dirichlet(Rng& rng, double alpha, Index dim);

/// Draw with covariance diag(r) - r r^T, the multinomial covariance, built as
/// sqrt(r) * z - r <sqrt(r), z> from a standard normal z.
Vector multinomial_gaussian(Rng& rng, const Vector& r);

double normal_cdf(double x);
double normal_quantile(double u);

}  // namespace rot
