#pragma once

// Exhaustive enumeration of small trees for finite-support laws, and exact
// checks of the change-of-measure identities against it.

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "gwspine/numeric.hpp"
#include "gwspine/offspring.hpp"
#include "gwspine/pgf.hpp"
#include "gwspine/spine.hpp"
#include "gwspine/tree.hpp"

namespace gwspine {

/// A tree cut at `depth()`: child counts of every vertex above the cut.
struct EnumeratedTree {
  std::vector<std::vector<std::uint32_t>> nu;  ///< nu[g][i], g < depth
  std::vector<std::uint64_t> z;                ///< Z_0..Z_depth
  double log_prob = 0.0;                       ///< ln GW(T_depth = this)

  [[nodiscard]] std::size_t depth() const { return nu.size(); }
  [[nodiscard]] double prob() const { return std::exp(log_prob); }

  /// First child index (at g+1) of every vertex at generation g, plus the end.
  [[nodiscard]] std::vector<std::uint32_t> child_offsets(std::size_t g) const {
    std::vector<std::uint32_t> off{0};
    for (auto k : nu[g]) off.push_back(off.back() + k);
    return off;
  }

  /// Ancestor indices of vertex `u` at generation depth(), for generations 0..depth.
  [[nodiscard]] std::vector<std::uint32_t> ancestry(std::uint32_t u) const {
    std::vector<std::uint32_t> path(depth() + 1);
    path[depth()] = u;
    for (std::size_t g = depth(); g-- > 0;) {
      const auto off = child_offsets(g);
      std::uint32_t p = 0;
      while (off[p + 1] <= path[g + 1]) ++p;
      path[g] = p;
    }
    return path;
  }

  /// Child counts of generations < n, flattened; identifies T_n.
  [[nodiscard]] std::vector<std::uint32_t> prefix_key(std::size_t n) const {
    std::vector<std::uint32_t> key;
    for (std::size_t g = 0; g < n; ++g) {
      key.insert(key.end(), nu[g].begin(), nu[g].end());
      key.push_back(0);
    }
    return key;
  }

  /// Child counts inside the depth-j subtree of vertex u at generation n.
  [[nodiscard]] std::vector<std::uint32_t> subtree_key(std::size_t n, std::uint32_t u,
                                                       std::size_t j) const {
    std::vector<std::uint32_t> key;
    std::uint32_t lo = u, hi = u + 1;
    for (std::size_t g = n; g < n + j; ++g) {
      key.insert(key.end(), nu[g].begin() + lo, nu[g].begin() + hi);
      key.push_back(0);
      const auto off = child_offsets(g);
      lo = off[lo];
      hi = off[hi];
    }
    return key;
  }

  /// Z_j(u) for u at generation n.
  [[nodiscard]] std::uint64_t subtree_population(std::size_t n, std::uint32_t u,
                                                 std::size_t j) const {
    std::uint32_t lo = u, hi = u + 1;
    for (std::size_t g = n; g < n + j; ++g) {
      const auto off = child_offsets(g);
      lo = off[lo];
      hi = off[hi];
    }
    return hi - lo;
  }
};

namespace detail {

inline std::vector<std::pair<std::uint32_t, double>> finite_support_points(const OffspringLaw& law) {
  if (!law.finite_support()) {
    throw std::invalid_argument("oracle enumeration needs a finite-support law");
  }
  std::vector<std::pair<std::uint32_t, double>> pts;
  law.for_each_support(1.0, [&](double l, double q) {
    if (q > 0.0) pts.emplace_back(static_cast<std::uint32_t>(l), std::log(q));
    return true;
  });
  return pts;
}

/// Calls f(assignment indices) for every point of support^count.
template <class F>
void for_each_assignment(std::size_t count, std::size_t support, F&& f) {
  std::vector<std::size_t> idx(count, 0);
  for (;;) {
    f(idx);
    std::size_t pos = 0;
    while (pos < count && ++idx[pos] == support) idx[pos++] = 0;
    if (pos == count) return;
  }
}

}  // namespace detail

inline constexpr std::size_t kDefaultEnumerationBudget = std::size_t{1} << 20;

/// Every depth-`depth` tree of a finite-support law with its GW probability.
inline std::vector<EnumeratedTree> enumerate_trees(const OffspringLaw& law, std::size_t depth,
                                                   std::size_t budget = kDefaultEnumerationBudget) {
  const auto pts = detail::finite_support_points(law);
  std::vector<EnumeratedTree> level(1);
  level[0].z = {1};
  for (std::size_t g = 0; g < depth; ++g) {
    std::vector<EnumeratedTree> next;
    for (const auto& t : level) {
      const std::size_t width = t.z.back();
      const double combos = std::pow(static_cast<double>(pts.size()), static_cast<double>(width));
      if (static_cast<double>(next.size()) + combos > static_cast<double>(budget)) {
        throw BudgetError("tree enumeration exceeds budget of " + std::to_string(budget));
      }
      detail::for_each_assignment(width, pts.size(), [&](const std::vector<std::size_t>& idx) {
        EnumeratedTree child = t;
        std::vector<std::uint32_t> row;
        std::uint64_t zn = 0;
        for (auto i : idx) {
          row.push_back(pts[i].first);
          child.log_prob += pts[i].second;
          zn += pts[i].first;
        }
        child.nu.push_back(std::move(row));
        child.z.push_back(zn);
        next.push_back(std::move(child));
      });
    }
    level = std::move(next);
  }
  return level;
}

struct CheckResult {
  std::string check;
  std::string law;
  std::size_t depth = 0;
  double max_abs_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  [[nodiscard]] bool all_pass() const {
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return !checks.empty();
  }
};

namespace detail {

inline CheckResult make_check(std::string name, const OffspringLaw& law, std::size_t depth,
                              double err, double tol) {
  return {std::move(name), law.spec(), depth, err, tol, err < tol};
}

/// ln of the construction probability of (T, xi_n = endpoint): spine factors
/// q^s / nu(xi_g), off-spine factors q~, over generations < depth.
inline double log_marked_mass(const OffspringLaw& law, const NormingTable& table,
                              const EnumeratedTree& t, std::uint32_t endpoint) {
  const auto path = t.ancestry(endpoint);
  CompensatedSum acc;
  for (std::size_t g = 0; g < t.depth(); ++g) {
    for (std::uint32_t v = 0; v < t.nu[g].size(); ++v) {
      const std::uint32_t k = t.nu[g][v];
      if (v == path[g]) {
        acc += std::log(spine_law(law, table, g, k)) - std::log(static_cast<double>(k));
      } else {
        acc += std::log(offspine_law(law, table, g, k));
      }
    }
  }
  return acc.value();
}

/// ln of (dM_n / Z_n) GW(T_n), from the martingale formulas alone.
inline double log_reweighted_gw(const NormingTable& table, const EnumeratedTree& t) {
  const std::size_t n = t.depth();
  const double zn = static_cast<double>(t.z[n]);
  return table.x(n) - table.log_d(n) - zn * table.x(n) + t.log_prob;
}

}  // namespace detail

/// Exact law of (T_n, xi_n) under the spine construction: one entry per
/// (tree, endpoint).
struct MarkedMass {
  std::size_t tree;
  std::uint32_t endpoint;
  double prob;
};

inline std::vector<MarkedMass> marked_tree_distribution(const OffspringLaw& law,
                                                        const NormingTable& table,
                                                        const std::vector<EnumeratedTree>& trees) {
  std::vector<MarkedMass> out;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    const auto& t = trees[i];
    for (std::uint32_t u = 0; u < t.z.back(); ++u) {
      out.push_back({i, u, std::exp(detail::log_marked_mass(law, table, t, u))});
    }
  }
  return out;
}

/// P(T_n = T, xi_n = u) = (dM_n / Z_n) GW(T_n = T) for every enumerated pair
/// at every depth 1..depth, plus the summed form and total mass.
inline VerificationReport verify_change_of_measure(const OffspringLaw& law,
                                                   const NormingTable& table, std::size_t depth) {
  VerificationReport report;
  double pair_err = 0.0, sum_err = 0.0, total_err = 0.0;
  for (std::size_t d = 1; d <= depth; ++d) {
    const auto trees = enumerate_trees(law, d);
    CompensatedSum total;
    for (const auto& t : trees) {
      const double rhs = std::exp(detail::log_reweighted_gw(table, t));
      CompensatedSum over_u;
      for (std::uint32_t u = 0; u < t.z.back(); ++u) {
        const double lhs = std::exp(detail::log_marked_mass(law, table, t, u));
        pair_err = std::max(pair_err, std::abs(lhs - rhs));
        over_u += lhs;
      }
      const double zn = static_cast<double>(t.z.back());
      sum_err = std::max(sum_err, std::abs(over_u.value() - zn * rhs));
      total += over_u.value();
    }
    total_err = std::max(total_err, std::abs(total.value() - 1.0));
  }
  report.checks.push_back(detail::make_check("change_of_measure", law, depth, pair_err, 1e-10));
  report.checks.push_back(detail::make_check("change_of_measure_sum", law, depth, sum_err, 1e-10));
  report.checks.push_back(detail::make_check("marked_total_mass", law, depth, total_err, 1e-10));
  return report;
}

/// P(xi_n = u | T_n) = 1 / Z_n.
inline VerificationReport verify_uniform_conditional(const OffspringLaw& law,
                                                     const NormingTable& table, std::size_t depth) {
  double err = 0.0, mass_err = 0.0;
  for (std::size_t d = 1; d <= depth; ++d) {
    for (const auto& t : enumerate_trees(law, d)) {
      std::vector<double> lhs;
      CompensatedSum total;
      for (std::uint32_t u = 0; u < t.z.back(); ++u) {
        lhs.push_back(std::exp(detail::log_marked_mass(law, table, t, u)));
        total += lhs.back();
      }
      const double inv_z = 1.0 / static_cast<double>(t.z.back());
      CompensatedSum cond_total;
      for (double p : lhs) {
        err = std::max(err, std::abs(p / total.value() - inv_z));
        cond_total += p / total.value();
      }
      mass_err = std::max(mass_err, std::abs(cond_total.value() - 1.0));
    }
  }
  VerificationReport report;
  report.checks.push_back(detail::make_check("uniform_conditional", law, depth, err, 1e-12));
  report.checks.push_back(
      detail::make_check("uniform_conditional_mass", law, depth, mass_err, 1e-12));
  return report;
}

/// One-step conditional expectations of M_n and dM_n over every depth-(n-1)
/// history, n = 1..depth; also GW completeness of each enumeration.
inline VerificationReport verify_martingales(const OffspringLaw& law, const NormingTable& table,
                                             std::size_t depth) {
  const auto pts = detail::finite_support_points(law);
  double m_err = 0.0, dm_err = 0.0, mass_err = 0.0;
  for (std::size_t n = 1; n <= depth; ++n) {
    const auto histories = enumerate_trees(law, n - 1);
    CompensatedSum mass;
    for (const auto& t : histories) {
      mass += t.prob();
      const auto before = martingale_point(t.z.back(), table, n - 1);
      CompensatedSum em, edm;
      detail::for_each_assignment(t.z.back(), pts.size(), [&](const std::vector<std::size_t>& idx) {
        double log_p = 0.0;
        std::uint64_t zn = 0;
        for (auto i : idx) {
          log_p += pts[i].second;
          zn += pts[i].first;
        }
        const auto after = martingale_point(zn, table, n);
        em += std::exp(log_p) * after.m;
        edm += std::exp(log_p) * after.dm;
      });
      m_err = std::max(m_err, std::abs(em.value() - before.m));
      dm_err = std::max(dm_err, std::abs(edm.value() - before.dm));
    }
    mass_err = std::max(mass_err, std::abs(mass.value() - 1.0));
  }
  {
    CompensatedSum mass;
    for (const auto& t : enumerate_trees(law, depth)) mass += t.prob();
    mass_err = std::max(mass_err, std::abs(mass.value() - 1.0));
  }
  VerificationReport report;
  report.checks.push_back(detail::make_check("martingale_M", law, depth, m_err, 1e-12));
  report.checks.push_back(detail::make_check("martingale_dM", law, depth, dm_err, 1e-12));
  report.checks.push_back(detail::make_check("gw_total_mass", law, depth, mass_err, 1e-12));
  return report;
}

/// Conditional law of the depth-j subtree of an off-spine vertex u at
/// generation n, given (T_n, xi_n), against GW reweighted by
/// M_j(u) = exp(1/c_n) exp(-Z_j(u) / c_{n+j}). Computed by marginalizing the
/// full marked-tree law at depth n + j.
inline VerificationReport verify_offspine_subtree_law(const OffspringLaw& law,
                                                      const NormingTable& table, std::size_t n,
                                                      std::size_t j) {
  if (n < 1 || j < 1) throw std::invalid_argument("verify_offspine_subtree_law: n, j >= 1");
  using Key = std::vector<std::uint32_t>;
  const auto trees = enumerate_trees(law, n + j);
  std::map<std::pair<Key, std::uint32_t>, double> history_mass;
  std::map<std::tuple<Key, std::uint32_t, std::uint32_t, Key>, std::pair<double, double>> joint;

  for (const auto& t : trees) {
    const Key prefix = t.prefix_key(n);
    for (std::uint32_t w = 0; w < t.z.back(); ++w) {
      const double p = std::exp(detail::log_marked_mass(law, table, t, w));
      const std::uint32_t xi_n = t.ancestry(w)[n];
      history_mass[{prefix, xi_n}] += p;
      for (std::uint32_t u = 0; u < t.z[n]; ++u) {
        if (u == xi_n) continue;
        // GW(S) for the subtree: product of q over its internal vertices.
        double log_gw = 0.0;
        std::uint32_t lo = u, hi = u + 1;
        for (std::size_t g = n; g < n + j; ++g) {
          for (std::uint32_t v = lo; v < hi; ++v) log_gw += std::log(law.pmf(t.nu[g][v]));
          const auto off = t.child_offsets(g);
          lo = off[lo];
          hi = off[hi];
        }
        const double zj = static_cast<double>(hi - lo);
        const double reweighted = std::exp(log_gw + table.x(n) - zj * table.x(n + j));
        auto& slot = joint[{prefix, xi_n, u, t.subtree_key(n, u, j)}];
        slot.first += p;
        slot.second = reweighted;
      }
    }
  }
  double err = 0.0;
  for (const auto& [key, val] : joint) {
    const auto& [prefix, xi_n, u, sub] = key;
    const double cond = val.first / history_mass.at({prefix, xi_n});
    err = std::max(err, std::abs(cond - val.second));
  }

  double density_err = 0.0;
  {
    CompensatedSum total;
    for (const auto& s : enumerate_trees(law, j)) {
      total += std::exp(s.log_prob + table.x(n) - static_cast<double>(s.z.back()) * table.x(n + j));
    }
    density_err = std::abs(total.value() - 1.0);
  }
  VerificationReport report;
  report.checks.push_back(detail::make_check(
      "offspine_subtree_law_n" + std::to_string(n) + "_j" + std::to_string(j), law, n + j, err,
      1e-10));
  report.checks.push_back(detail::make_check(
      "offspine_density_mass_n" + std::to_string(n) + "_j" + std::to_string(j), law, n + j,
      density_err, 1e-12));
  return report;
}

/// The full suite at the given depth.
inline VerificationReport verify_all(const OffspringLaw& law, const NormingTable& table,
                                     std::size_t depth) {
  VerificationReport all;
  auto append = [&](VerificationReport r) {
    all.checks.insert(all.checks.end(), r.checks.begin(), r.checks.end());
  };
  append(verify_change_of_measure(law, table, depth));
  append(verify_uniform_conditional(law, table, depth));
  append(verify_martingales(law, table, depth));
  for (std::size_t n = 1; n < depth; ++n) {
    for (std::size_t j = 1; n + j <= depth; ++j) append(verify_offspine_subtree_law(law, table, n, j));
  }
  return all;
}

}  // namespace gwspine
