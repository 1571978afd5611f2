#pragma once

// Galton-Watson trees stored generation by generation, finite-horizon
// Seneta-Heyde estimates and the (derivative) martingale traces.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gwspine/offspring.hpp"
#include "gwspine/pgf.hpp"
#include "gwspine/random.hpp"

namespace gwspine {

/// A requested window reaches below a vertex whose children were not
/// materialized.
class TruncationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A single materialization request cannot fit any budget (e.g. a spine
/// vertex with more children than `kMaxGeneration`).
class BudgetError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct VertexId {
  std::size_t generation = 0;
  std::uint32_t index = 0;
  friend bool operator==(const VertexId&, const VertexId&) = default;
};

class GWTree {
public:
  /// Indices are 32-bit; a generation can hold at most this many vertices.
  static constexpr std::uint64_t kMaxGeneration = std::numeric_limits<std::uint32_t>::max() - 1;

  struct Generation {
    std::vector<std::uint32_t> parent;           ///< index in the previous generation
    std::vector<std::uint64_t> nu;               ///< drawn child count; 0 if never drawn
    std::vector<std::uint32_t> child_begin;      ///< size()+1 entries once the next level exists
    std::vector<std::uint32_t> truncated_prefix; ///< running count of truncated vertices

    [[nodiscard]] std::size_t size() const { return nu.size(); }
  };

  GWTree() {
    Generation root;
    root.parent.push_back(0);
    root.nu.push_back(0);
    root.truncated_prefix = {0, 0};
    gens_.push_back(std::move(root));
  }

  /// Deepest materialized generation.
  [[nodiscard]] std::size_t depth() const { return gens_.size() - 1; }
  [[nodiscard]] std::uint64_t population(std::size_t n) const { return generation(n).size(); }
  [[nodiscard]] const Generation& generation(std::size_t n) const {
    if (n >= gens_.size()) throw std::out_of_range("generation beyond tree depth");
    return gens_[n];
  }
  [[nodiscard]] std::vector<std::uint64_t> populations() const {
    std::vector<std::uint64_t> z;
    for (const auto& g : gens_) z.push_back(g.size());
    return z;
  }
  [[nodiscard]] std::uint64_t vertex_count() const { return vertex_count_; }
  [[nodiscard]] bool truncated() const { return truncated_; }
  [[nodiscard]] bool truncated(VertexId u) const {
    const auto& g = generation(u.generation);
    return g.truncated_prefix[u.index + 1] != g.truncated_prefix[u.index];
  }
  /// True if some vertex at generation n lost its children.
  [[nodiscard]] bool truncated_at(std::size_t n) const {
    return generation(n).truncated_prefix.back() != 0;
  }
  [[nodiscard]] std::uint64_t nu(VertexId u) const { return generation(u.generation).nu[u.index]; }
  [[nodiscard]] VertexId parent(VertexId u) const {
    if (u.generation == 0) throw std::invalid_argument("root has no parent");
    return {u.generation - 1, generation(u.generation).parent[u.index]};
  }
  /// Materialized children of u, as a half-open index range at u.generation + 1.
  [[nodiscard]] std::pair<std::uint32_t, std::uint32_t> children(VertexId u) const {
    const auto& g = generation(u.generation);
    if (g.child_begin.empty()) return {0, 0};
    return {g.child_begin[u.index], g.child_begin[u.index + 1]};
  }

  /// Appends one generation. `draw(i)` gives the child count of vertex i of
  /// the current deepest generation; `always(i)` marks vertices whose
  /// children are materialized regardless of `cap`. Vertices are visited in
  /// order, so truncation is breadth-first.
  template <class Draw, class Always>
  void grow(std::uint64_t cap, Draw&& draw, Always&& always) {
    Generation& cur = gens_.back();
    Generation next;
    cur.child_begin.assign(1, 0);
    cur.truncated_prefix.assign(1, 0);
    std::uint32_t truncated_count = 0;
    for (std::uint32_t i = 0; i < cur.size(); ++i) {
      const std::uint64_t k = draw(i);
      cur.nu[i] = k;
      const bool forced = always(i);
      const bool fits = vertex_count_ + k <= cap && next.size() + k <= kMaxGeneration;
      if (forced && next.size() + k > kMaxGeneration) {
        throw BudgetError("forced materialization of " + std::to_string(k) +
                          " children exceeds the generation index range");
      }
      if (forced || fits) {
        next.parent.insert(next.parent.end(), k, i);
        vertex_count_ += k;
      } else {
        ++truncated_count;
        truncated_ = true;
      }
      cur.child_begin.push_back(static_cast<std::uint32_t>(next.parent.size()));
      cur.truncated_prefix.push_back(truncated_count);
    }
    next.nu.assign(next.parent.size(), 0);
    next.truncated_prefix.assign(next.parent.size() + 1, 0);
    gens_.push_back(std::move(next));
  }

private:
  std::vector<Generation> gens_;
  std::uint64_t vertex_count_ = 1;
  bool truncated_ = false;
};

/// Plain Galton-Watson tree to `depth`, at most `cap` vertices.
inline GWTree simulate_gw(const OffspringLaw& law, std::size_t depth, std::uint64_t cap, Rng& rng) {
  if (cap < 1) throw std::invalid_argument("simulate_gw: cap must be >= 1");
  GWTree tree;
  const auto& table = law.table();
  for (std::size_t g = 0; g < depth; ++g) {
    tree.grow(
        cap, [&](std::uint32_t) { return table.sample(rng); },
        [](std::uint32_t) { return false; });
  }
  return tree;
}

/// Z_k(u): descendants of u at generation |u| + k.
inline std::uint64_t subtree_population(const GWTree& tree, VertexId u, std::size_t k) {
  if (u.generation + k > tree.depth()) {
    throw std::out_of_range("subtree_population: window below tree depth");
  }
  if (u.index >= tree.population(u.generation)) {
    throw std::out_of_range("subtree_population: vertex not materialized");
  }
  std::uint64_t lo = u.index;
  std::uint64_t hi = u.index + 1;
  for (std::size_t g = u.generation; g < u.generation + k; ++g) {
    const auto& gen = tree.generation(g);
    if (gen.truncated_prefix[hi] != gen.truncated_prefix[lo]) {
      throw TruncationError("subtree_population: window crosses a truncated vertex at generation " +
                            std::to_string(g));
    }
    lo = gen.child_begin[lo];
    hi = gen.child_begin[hi];
  }
  return hi - lo;
}

/// Finite-horizon W estimate Z_k(u) / c_k.
inline double estimate_w(const GWTree& tree, VertexId u, const NormingTable& table, std::size_t k) {
  return static_cast<double>(subtree_population(tree, u, k)) * table.x(k);
}

struct MartingalePoint {
  double m;      ///< M_n = exp(-Z_n / c_n)
  double dm;     ///< derivative martingale exp(1/c_n) (Z_n / D_n) M_n
  double w_hat;  ///< Z_n / c_n
};

struct MartingaleTrace {
  std::vector<MartingalePoint> points;
  bool truncated = false;
};

inline MartingalePoint martingale_point(std::uint64_t z, const NormingTable& table, std::size_t n) {
  const double x = table.x(n);
  const double zd = static_cast<double>(z);
  const double w = zd * x;
  return {std::exp(-w), std::exp(x + std::log(zd) - table.log_d(n) - w), w};
}

/// Trace over a population sequence z[0..N].
inline MartingaleTrace martingale_trace(std::span<const std::uint64_t> z, const NormingTable& table) {
  if (z.size() > table.rows().size()) {
    throw std::out_of_range("martingale_trace: tree deeper than norming table");
  }
  MartingaleTrace trace;
  for (std::size_t n = 0; n < z.size(); ++n) trace.points.push_back(martingale_point(z[n], table, n));
  return trace;
}

inline MartingaleTrace martingale_trace(const GWTree& tree, const NormingTable& table) {
  const auto z = tree.populations();
  auto trace = martingale_trace(std::span<const std::uint64_t>(z), table);
  trace.truncated = tree.truncated();
  return trace;
}

/// exp(1/c_0) e^-1 max_{j<=n} c_j / D_j, from x e^-x <= 1/e.
inline double derivative_martingale_bound(const NormingTable& table, std::size_t n) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j <= n; ++j) best = std::max(best, -std::log(table.x(j)) - table.log_d(j));
  return std::exp(table.x(0) - 1.0 + best);
}

/// Population sizes Z_0..Z_depth only, with each generation's offspring
/// total drawn as one multinomial aggregate. Same law as the populations
/// of `simulate_gw` without a vertex cap.
inline std::vector<std::uint64_t> simulate_population(const OffspringLaw& law, std::size_t depth,
                                                      Rng& rng, bool* saturated = nullptr) {
  std::vector<std::uint64_t> z{1};
  bool sat = false;
  for (std::size_t g = 0; g < depth; ++g) z.push_back(law.table().sample_sum(z.back(), rng, sat));
  if (saturated) *saturated = sat;
  return z;
}

}  // namespace gwspine
