#pragma once

// Size-biased spine construction under the derivative-martingale change of
// measure. At generation k the spine vertex draws from
//   q^s_l = q_l l exp(-(l-1)/c_{k+1}) D_k / D_{k+1}
// every other vertex from
//   q~_l  = q_l exp(1/c_k) exp(-l/c_{k+1})
// and the next spine vertex is a uniform child of the current one.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gwspine/discrete_table.hpp"
#include "gwspine/offspring.hpp"
#include "gwspine/pgf.hpp"
#include "gwspine/random.hpp"
#include "gwspine/tree.hpp"

namespace gwspine {

namespace detail {

inline void require_generation(const NormingTable& table, std::size_t k) {
  if (k + 1 > table.depth()) {
    throw std::out_of_range("tilted law at generation " + std::to_string(k) +
                            " needs norming row " + std::to_string(k + 1));
  }
}

inline double log_spine_factor(const NormingTable& table, std::size_t k, double l) {
  return std::log(l) - (l - 1.0) * table.x(k + 1) - table.log_d_step(k + 1);
}

inline double log_offspine_factor(const NormingTable& table, std::size_t k, double l) {
  return table.x(k) - l * table.x(k + 1);
}

/// Upper bound on spine mass beyond L.
inline double spine_tail_bound(const OffspringLaw& law, const NormingTable& table, std::size_t k,
                               double L) {
  return std::exp(-L * table.x(k + 1) - table.log_d_step(k + 1)) *
         law.tail_first_moment(L);
}

/// Upper bound on off-spine mass beyond L.
inline double offspine_tail_bound(const OffspringLaw& law, const NormingTable& table,
                                  std::size_t k, double L) {
  return std::exp(table.x(k) - (L + 1.0) * table.x(k + 1)) * law.tail_mass(L);
}

}  // namespace detail

/// Spine offspring law at generation k.
inline double spine_law(const OffspringLaw& law, const NormingTable& table, std::size_t k,
                        std::uint64_t l) {
  detail::require_generation(table, k);
  if (l == 0) throw std::invalid_argument("spine_law: child count must be >= 1");
  const double q = law.pmf(l);
  if (q == 0.0) return 0.0;
  return std::exp(std::log(q) + detail::log_spine_factor(table, k, static_cast<double>(l)));
}

/// Off-spine offspring law at generation k.
inline double offspine_law(const OffspringLaw& law, const NormingTable& table, std::size_t k,
                           std::uint64_t l) {
  detail::require_generation(table, k);
  if (l == 0) throw std::invalid_argument("offspine_law: child count must be >= 1");
  const double q = law.pmf(l);
  if (q == 0.0) return 0.0;
  return std::exp(std::log(q) + detail::log_offspine_factor(table, k, static_cast<double>(l)));
}

/// Per-generation sampling tables for both tilted laws, built once from a
/// shared norming table and read by every sampler.
class SpineKernels {
public:
  SpineKernels(const OffspringLaw& law, const NormingTable& table, std::size_t generations)
      : mean_(law.mean()) {
    if (generations > table.depth()) {
      throw std::out_of_range("SpineKernels: norming table too shallow");
    }
    spine_.reserve(generations);
    offspine_.reserve(generations);
    for (std::size_t k = 0; k < generations; ++k) {
      spine_.push_back(tabulate(law, [&](double l, double q) {
        return q * std::exp(detail::log_spine_factor(table, k, l));
      }, [&](double L) { return detail::spine_tail_bound(law, table, k, L); }));
      offspine_.push_back(tabulate(law, [&](double l, double q) {
        return q * std::exp(detail::log_offspine_factor(table, k, l));
      }, [&](double L) { return detail::offspine_tail_bound(law, table, k, L); }));
    }
  }

  [[nodiscard]] std::size_t generations() const { return spine_.size(); }
  [[nodiscard]] double mean() const { return mean_; }
  [[nodiscard]] const DiscreteTable& spine(std::size_t k) const { return spine_.at(k); }
  [[nodiscard]] const DiscreteTable& offspine(std::size_t k) const { return offspine_.at(k); }

private:
  template <class Mass, class Tail>
  static DiscreteTable tabulate(const OffspringLaw& law, Mass&& mass, Tail&& tail) {
    std::vector<std::pair<std::uint64_t, double>> points;
    double rest = 0.0;
    law.for_each_support(1.0, [&](double l, double q) {
      if (l > static_cast<double>(kMaxSupportValue)) {
        throw BudgetError("tilted law support exceeds 2^62; norming horizon too deep");
      }
      points.emplace_back(static_cast<std::uint64_t>(l), mass(l, q));
      rest = tail(l);
      return rest >= kTableTailMass;
    });
    return DiscreteTable(std::move(points), rest);
  }

  double mean_;
  std::vector<DiscreteTable> spine_;
  std::vector<DiscreteTable> offspine_;
};

inline std::uint64_t sample_spine_children(const SpineKernels& kernels, std::size_t k, Rng& rng) {
  return kernels.spine(k).sample(rng);
}

inline std::uint64_t sample_offspine_children(const SpineKernels& kernels, std::size_t k, Rng& rng) {
  return kernels.offspine(k).sample(rng);
}

/// Spine child counts nu(xi_0..xi_{depth-1}); these are independent across
/// generations.
inline std::vector<std::uint64_t> sample_spine_path(const SpineKernels& kernels, std::size_t depth,
                                                    Rng& rng) {
  if (depth > kernels.generations()) throw std::out_of_range("sample_spine_path: depth");
  std::vector<std::uint64_t> nu(depth);
  for (std::size_t k = 0; k < depth; ++k) nu[k] = kernels.spine(k).sample(rng);
  return nu;
}

/// A tree with a distinguished ray xi (the spine).
struct MarkedTree {
  GWTree tree;
  std::vector<std::uint32_t> spine;  ///< index of xi_n within generation n

  [[nodiscard]] std::size_t depth() const { return tree.depth(); }
  [[nodiscard]] VertexId spine_vertex(std::size_t n) const { return {n, spine.at(n)}; }
  [[nodiscard]] std::uint64_t spine_nu(std::size_t n) const { return tree.nu(spine_vertex(n)); }

  /// H(xi_n): children of xi_n other than xi_{n+1}.
  [[nodiscard]] std::vector<VertexId> siblings(std::size_t n) const {
    if (n + 1 > depth()) throw std::out_of_range("siblings: generation at or below depth");
    const auto [lo, hi] = tree.children(spine_vertex(n));
    std::vector<VertexId> out;
    for (std::uint32_t i = lo; i < hi; ++i) {
      if (i != spine[n + 1]) out.push_back({n + 1, i});
    }
    return out;
  }
};

/// Marked tree to `depth`. Off-spine growth stops breadth-first once `cap`
/// vertices exist; spine children (the next spine vertex and its siblings)
/// are always materialized.
inline MarkedTree sample_marked_tree(const SpineKernels& kernels, std::size_t depth,
                                     std::uint64_t cap, Rng& rng) {
  if (depth > kernels.generations()) throw std::out_of_range("sample_marked_tree: depth");
  if (cap < 1) throw std::invalid_argument("sample_marked_tree: cap must be >= 1");
  MarkedTree marked;
  marked.spine.push_back(0);
  for (std::size_t g = 0; g < depth; ++g) {
    const std::uint32_t xi = marked.spine[g];
    std::uint64_t spine_choice = 0;
    const auto& spine_law_g = kernels.spine(g);
    const auto& offspine_law_g = kernels.offspine(g);
    marked.tree.grow(
        cap,
        [&](std::uint32_t i) {
          if (i != xi) return offspine_law_g.sample(rng);
          const std::uint64_t nu = spine_law_g.sample(rng);
          spine_choice = uniform_index(rng, nu);
          return nu;
        },
        [&](std::uint32_t i) { return i == xi; });
    const auto [lo, hi] = marked.tree.children(marked.spine_vertex(g));
    marked.spine.push_back(lo + static_cast<std::uint32_t>(spine_choice));
  }
  return marked;
}

/// Population bookkeeping along the spine without vertex identities.
///
/// Clan i is the set of descendants of H(xi_i); it starts at generation i+1
/// with nu(xi_i) - 1 members. The subtree of xi_n at generation n+k is xi_{n+k}
/// plus clans n..n+k-1, so every spine-related population is a clan sum.
struct SpineProfile {
  std::size_t depth = 0;
  std::vector<std::uint64_t> spine_nu;            ///< nu(xi_g), g < depth
  std::vector<std::vector<std::uint64_t>> clans;  ///< clans[i][g - i - 1], g = i+1..depth
  bool truncated = false;

  [[nodiscard]] std::uint64_t clan_population(std::size_t i, std::size_t g) const {
    if (g <= i || g > depth) throw std::out_of_range("clan_population: generation");
    return clans.at(i)[g - i - 1];
  }

  /// Z_k(xi_n).
  [[nodiscard]] std::uint64_t subtree_population(std::size_t n, std::size_t k) const {
    if (n + k > depth) throw std::out_of_range("SpineProfile: window below depth");
    std::uint64_t z = 1;
    for (std::size_t i = n; i < n + k; ++i) z = saturating_add(z, clan_population(i, n + k));
    return z;
  }

  /// Z_g.
  [[nodiscard]] std::uint64_t population(std::size_t g) const { return subtree_population(0, g); }

  /// Sum over H(xi_n) of Z_j(u), i.e. clan n at generation n+1+j.
  [[nodiscard]] std::uint64_t sibling_population(std::size_t n, std::size_t j) const {
    return clan_population(n, n + 1 + j);
  }

  static std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
    return b > DiscreteTable::kMaxPopulation - std::min(a, DiscreteTable::kMaxPopulation)
               ? DiscreteTable::kMaxPopulation
               : a + b;
  }
};

/// Spine profile to `depth` with every clan generation drawn as one
/// multinomial aggregate. Same law as `profile_of(sample_marked_tree(...))`
/// without a vertex cap; populations saturate at 2^62 and set `truncated`.
inline SpineProfile sample_spine_profile(const SpineKernels& kernels, std::size_t depth, Rng& rng) {
  if (depth > kernels.generations()) throw std::out_of_range("sample_spine_profile: depth");
  SpineProfile p;
  p.depth = depth;
  p.spine_nu.resize(depth);
  p.clans.resize(depth);
  for (std::size_t g = 0; g < depth; ++g) {
    const std::uint64_t nu = kernels.spine(g).sample(rng);
    p.spine_nu[g] = nu;
    const auto& off = kernels.offspine(g);
    for (std::size_t i = 0; i < g; ++i) {
      auto& clan = p.clans[i];
      clan.push_back(off.sample_sum(clan.back(), rng, p.truncated));
    }
    p.clans[g].push_back(nu - 1);
  }
  return p;
}

inline SpineProfile profile_of(const MarkedTree& marked) {
  const std::size_t depth = marked.depth();
  SpineProfile p;
  p.depth = depth;
  p.truncated = marked.tree.truncated();
  p.spine_nu.resize(depth);
  p.clans.resize(depth);
  for (std::size_t i = 0; i < depth; ++i) p.clans[i].assign(depth - i, 0);

  constexpr std::uint32_t kOnSpine = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> label{kOnSpine};
  for (std::size_t g = 0; g < depth; ++g) {
    p.spine_nu[g] = marked.spine_nu(g);
    const auto& gen = marked.tree.generation(g);
    std::vector<std::uint32_t> next(marked.tree.population(g + 1));
    for (std::uint32_t v = 0; v < gen.size(); ++v) {
      for (std::uint32_t c = gen.child_begin[v]; c < gen.child_begin[v + 1]; ++c) {
        std::uint32_t lab = label[v];
        if (lab == kOnSpine) lab = c == marked.spine[g + 1] ? kOnSpine : static_cast<std::uint32_t>(g);
        next[c] = lab;
        if (lab != kOnSpine) ++p.clans[lab][g - lab];
      }
    }
    label = std::move(next);
  }
  return p;
}

}  // namespace gwspine
