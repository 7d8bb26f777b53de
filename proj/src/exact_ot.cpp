#include <array>
#include <cmath>

#include "rot/random.hpp"
#include "rot/solver.hpp"

namespace rot {

namespace {

constexpr Index kMaxExactSize = 6;
constexpr double kFeasibilityTol = 1e-12;

// Depth-first enumeration of spanning trees of the complete bipartite graph
// K_{N,N}. Every tree is a dual basis: its edges are made tight, and the
// potentials are propagated as components merge. A component whose internal
// edges violate u_i + v_j <= c_ij cannot become feasible later because merges
// only shift whole components, so it is pruned.
class DualBasisEnumerator {
 public:
  DualBasisEnumerator(const CostVector& c, const Prob& r, const Prob& s)
      : n_(c.size()), cost_(c.matrix()), r_(r.weights()), s_(s.weights()) {
    for (Index v = 0; v < 2 * n_; ++v) {
      state_.component[std::size_t(v)] = v;
      state_.potential[std::size_t(v)] = 0.0;
    }
  }

  ExactTransport run() {
    recurse(0, 0, state_);
    ExactTransport out;
    out.value = best_;
    const double tol = 1e-9 * std::max(1.0, std::abs(best_));
    for (const auto& [objective, vertex] : candidates_) {
      if (objective < best_ - tol) continue;
      bool duplicate = false;
      for (const Vector& seen : out.dual_vertices) {
        if ((seen - vertex).lpNorm<Eigen::Infinity>() <= 1e-9) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) out.dual_vertices.push_back(vertex);
    }
    return out;
  }

 private:
  struct State {
    std::array<Index, 2 * kMaxExactSize> component{};
    std::array<double, 2 * kMaxExactSize> potential{};
  };

  void recurse(Index edge, Index chosen, const State& state) {
    const Index needed = 2 * n_ - 1;
    if (chosen == needed) {
      record(state);
      return;
    }
    const Index total = n_ * n_;
    if (total - edge < needed - chosen) return;

    const Index i = edge / n_;
    const Index j = edge % n_;
    const Index row_comp = state.component[std::size_t(i)];
    const Index col_comp = state.component[std::size_t(n_ + j)];
    if (row_comp != col_comp) {
      State next = state;
      const double delta = next.potential[std::size_t(i)] + next.potential[std::size_t(n_ + j)] -
                           cost_(i, j);
      for (Index v = 0; v < 2 * n_; ++v) {
        if (next.component[std::size_t(v)] != col_comp) continue;
        next.potential[std::size_t(v)] += v < n_ ? delta : -delta;
        next.component[std::size_t(v)] = row_comp;
      }
      if (component_feasible(next, row_comp)) recurse(edge + 1, chosen + 1, next);
    }
    recurse(edge + 1, chosen, state);
  }

  bool component_feasible(const State& state, Index comp) const {
    for (Index a = 0; a < n_; ++a) {
      if (state.component[std::size_t(a)] != comp) continue;
      for (Index b = 0; b < n_; ++b) {
        if (state.component[std::size_t(n_ + b)] != comp) continue;
        const double slack =
            cost_(a, b) - state.potential[std::size_t(a)] - state.potential[std::size_t(n_ + b)];
        if (slack < -kFeasibilityTol * std::max(1.0, std::abs(cost_(a, b)))) return false;
      }
    }
    return true;
  }

  void record(const State& state) {
    Vector vertex(2 * n_);
    const double last = state.potential[std::size_t(2 * n_ - 1)];
    for (Index a = 0; a < n_; ++a) vertex[a] = state.potential[std::size_t(a)] + last;
    for (Index b = 0; b < n_; ++b) vertex[n_ + b] = state.potential[std::size_t(n_ + b)] - last;
    const double objective = r_.dot(vertex.head(n_)) + s_.dot(vertex.tail(n_));
    if (objective > best_) {
      best_ = objective;
      // drop candidates that can no longer be optimal to keep memory bounded
      const double tol = 1e-9 * std::max(1.0, std::abs(best_));
      std::erase_if(candidates_, [&](const auto& c) { return c.first < best_ - tol; });
    }
    if (objective >= best_ - 1e-9 * std::max(1.0, std::abs(best_)))
      candidates_.emplace_back(objective, std::move(vertex));
  }

  Index n_;
  RowMatrix cost_;
  Vector r_;
  Vector s_;
  State state_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, Vector>> candidates_;
};

}  // namespace

ExactTransport exact_ot_baseline(const CostVector& c, const Prob& r, const Prob& s) {
  if (c.size() != r.size() || c.size() != s.size())
    throw ConfigError("cost, r and s dimensions differ");
  if (c.size() > kMaxExactSize)
    throw ConfigError("exact baseline enumerates spanning trees and is limited to N <= 6");
  if (c.size() == 1) return {0.0, {Vector::Zero(2)}};
  return DualBasisEnumerator(c, r, s).run();
}

std::vector<double> ot_limit_sample(const CostVector& c, const Prob& r,
                                    const std::vector<Vector>& dual_vertices, Index draws,
                                    std::uint64_t seed) {
  if (dual_vertices.empty()) throw ConfigError("no dual vertices to maximize over");
  if (draws < 1) throw ConfigError("need at least one draw");
  const Index n = r.size();
  for (const Vector& u : dual_vertices)
    if (u.size() != 2 * n) throw ConfigError("dual vertex has wrong length");
  std::vector<double> out(static_cast<std::size_t>(draws));
  for (Index k = 0; k < draws; ++k) {
    Rng rng = make_rng(seed, std::uint64_t(k));
    const Vector g = multinomial_gaussian(rng, r.weights());
    double best = -std::numeric_limits<double>::infinity();
    for (const Vector& u : dual_vertices) best = std::max(best, g.dot(u.head(n)));
    out[std::size_t(k)] =
        c.p() == 1.0 ? best : std::copysign(std::pow(std::abs(best), 1.0 / c.p()), best);
  }
  return out;
}

}  // namespace rot
