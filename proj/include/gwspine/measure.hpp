#pragma once

// Branching-measure cylinder weights, finite-horizon Holder exponents along
// the spine, and burst statistics nu(xi_n) in (a^n, b^n).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "gwspine/numeric.hpp"
#include "gwspine/offspring.hpp"
#include "gwspine/pgf.hpp"
#include "gwspine/spine.hpp"
#include "gwspine/tree.hpp"

namespace gwspine {

/// UNIF mass of the cylinder at u, as the exact ratio Z_k(u) / Z_{|u|+k}.
struct UnifWeight {
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 1;
  [[nodiscard]] double value() const {
    return static_cast<double>(numerator) / static_cast<double>(denominator);
  }
};

inline UnifWeight unif_weight(const GWTree& tree, VertexId u, std::size_t k) {
  return {subtree_population(tree, u, k), subtree_population(tree, {0, 0}, u.generation + k)};
}

struct TrajectoryPoint {
  std::size_t n = 0;
  std::uint64_t nu_spine = 0;    ///< nu(xi_n)
  std::uint64_t z_n = 0;         ///< Z_n
  std::uint64_t z_far = 0;       ///< Z_{n+k}, the level the estimates read
  double w_hat_spine = 0.0;      ///< Z_k(xi_n) / c_k
  double sibling_mass = 0.0;     ///< sum over H(xi_n) of Z_{k-1}(u) / c_{k-1}
  double holder_hat = 0.0;       ///< -(1/n) ln(m^-n W(xi_n) / W(e))
  double growth_hat = 0.0;       ///< (1/n) ln W(xi_n)
};

struct TrajectoryRecord {
  std::size_t horizon = 0;  ///< k
  double mean = 0.0;        ///< m
  double w_hat_root = 0.0;  ///< Z_k / c_k
  double sibling_ratio = 0.0;  ///< c_k / c_{k-1}: W(xi_n) * ratio >= sibling_mass
  std::vector<TrajectoryPoint> points;  ///< n = 1..N
  bool truncated = false;
};

/// Holder/growth trajectory along the spine for n = 1..profile.depth - horizon.
inline TrajectoryRecord holder_trajectory(const SpineProfile& profile, const NormingTable& table,
                                          double mean, std::size_t horizon) {
  if (horizon < 1) throw std::invalid_argument("holder_trajectory: horizon must be >= 1");
  if (horizon > profile.depth) throw std::out_of_range("holder_trajectory: horizon beyond depth");
  const std::size_t last = profile.depth - horizon;
  const double xk = table.x(horizon);
  const double xk1 = table.x(horizon - 1);

  TrajectoryRecord rec;
  rec.horizon = horizon;
  rec.mean = mean;
  rec.truncated = profile.truncated;
  rec.w_hat_root = static_cast<double>(profile.subtree_population(0, horizon)) * xk;
  rec.sibling_ratio = xk1 / xk;
  const double log_root = std::log(rec.w_hat_root);
  const double log_m = std::log(mean);
  for (std::size_t n = 1; n <= last; ++n) {
    TrajectoryPoint pt;
    pt.n = n;
    pt.nu_spine = profile.spine_nu[n];
    pt.z_n = profile.population(n);
    pt.z_far = profile.population(n + horizon);
    pt.w_hat_spine = static_cast<double>(profile.subtree_population(n, horizon)) * xk;
    pt.sibling_mass = static_cast<double>(profile.sibling_population(n, horizon - 1)) * xk1;
    const double inv_n = 1.0 / static_cast<double>(n);
    const double log_w = std::log(pt.w_hat_spine);
    pt.growth_hat = inv_n * log_w;
    pt.holder_hat = -inv_n * (-static_cast<double>(n) * log_m + log_w - log_root);
    rec.points.push_back(pt);
  }
  return rec;
}

inline TrajectoryRecord holder_trajectory(const MarkedTree& marked, const NormingTable& table,
                                          double mean, std::size_t horizon) {
  return holder_trajectory(profile_of(marked), table, mean, horizon);
}

namespace detail {

inline void require_window(double a, double b, double mean) {
  if (!(1.0 < a && a < b && b < mean)) {
    throw std::invalid_argument("burst window needs 1 < a < b < m");
  }
}

}  // namespace detail

/// Generations n with a^n < nu(xi_n) < b^n.
inline std::vector<std::size_t> burst_scan(const TrajectoryRecord& record, double a, double b) {
  detail::require_window(a, b, record.mean);
  std::vector<std::size_t> hits;
  for (const auto& pt : record.points) {
    const double nu = static_cast<double>(pt.nu_spine);
    const double dn = static_cast<double>(pt.n);
    if (std::pow(a, dn) < nu && nu < std::pow(b, dn)) hits.push_back(pt.n);
  }
  return hits;
}

/// Same scan over a bare spine path nu(xi_0..).
inline std::size_t burst_count(std::span<const std::uint64_t> spine_nu, double a, double b,
                               std::size_t last) {
  std::size_t hits = 0;
  for (std::size_t n = 0; n <= last && n < spine_nu.size(); ++n) {
    const double nu = static_cast<double>(spine_nu[n]);
    const double dn = static_cast<double>(n);
    if (std::pow(a, dn) < nu && nu < std::pow(b, dn)) ++hits;
  }
  return hits;
}

/// P(nu(xi_n) in (a^n, b^n)) summed directly from the spine law.
inline double spine_burst_prob(const OffspringLaw& law, const NormingTable& table, std::size_t n,
                               double a, double b) {
  detail::require_window(a, b, law.mean());
  detail::require_generation(table, n);
  const double lo = std::pow(a, static_cast<double>(n));
  const double hi = std::pow(b, static_cast<double>(n));
  CompensatedSum acc;
  law.for_each_support(std::floor(lo) + 1.0, [&](double l, double q) {
    if (l >= hi) return false;
    if (l > lo) acc += q * std::exp(detail::log_spine_factor(table, n, l));
    const double rest = detail::spine_tail_bound(law, table, n, l);
    return rest > 1e-20 * acc.value() && rest > 1e-300;
  });
  return acc.value();
}

/// S_0..S_N with S_N = sum_{n <= N} spine_burst_prob(n).
inline std::vector<double> burst_partial_sums(const OffspringLaw& law, const NormingTable& table,
                                              std::size_t last, double a, double b) {
  std::vector<double> s;
  CompensatedSum acc;
  for (std::size_t n = 0; n <= last; ++n) {
    acc += spine_burst_prob(law, table, n, a, b);
    s.push_back(acc.value());
  }
  return s;
}

/// Lower bound (D_n / D_{n+1}) e^{-b^n / c_n} sum_{a^n < l < b^n} l q_l.
inline double spine_burst_lower_bound(const OffspringLaw& law, const NormingTable& table,
                                      std::size_t n, double a, double b) {
  detail::require_window(a, b, law.mean());
  detail::require_generation(table, n);
  const double lo = std::pow(a, static_cast<double>(n));
  const double hi = std::pow(b, static_cast<double>(n));
  CompensatedSum acc;
  law.for_each_support(std::floor(lo) + 1.0, [&](double l, double q) {
    if (l >= hi) return false;
    if (l > lo) acc += l * q;
    return law.tail_first_moment(l) > 1e-20 * acc.value() && law.tail_first_moment(l) > 1e-300;
  });
  return std::exp(table.log_d(n) - table.log_d(n + 1) - hi * table.x(n)) * acc.value();
}

struct Quantiles {
  double q05 = 0, q25 = 0, median = 0, q75 = 0, q95 = 0, mad = 0;
};

/// Type-7 (linear interpolation) quantiles plus the unscaled median
/// absolute deviation.
inline Quantiles quantiles(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("quantiles: empty sample");
  std::sort(v.begin(), v.end());
  auto at = [&](double p) {
    const double h = p * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] + frac * (v[i + 1] - v[i]) : v[i];
  };
  Quantiles q{at(0.05), at(0.25), at(0.5), at(0.75), at(0.95), 0.0};
  std::vector<double> dev;
  dev.reserve(v.size());
  for (double x : v) dev.push_back(std::abs(x - q.median));
  std::sort(dev.begin(), dev.end());
  const double h = 0.5 * static_cast<double>(dev.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(h));
  q.mad = i + 1 < dev.size() ? dev[i] + (h - static_cast<double>(i)) * (dev[i + 1] - dev[i]) : dev[i];
  return q;
}

struct GrowthSummary {
  std::size_t records = 0;
  std::vector<double> max_growth;    ///< max_n growth_hat per record (running limsup proxy)
  std::vector<double> min_holder;    ///< min_n holder_hat per record (running liminf proxy)
  Quantiles max_growth_q;
  Quantiles min_holder_q;
  std::vector<double> median_holder_by_n;
  std::vector<double> median_growth_by_n;
  /// Points where ln W(xi_n) > ln(Z_{n+k} / c_k); zero unless something is wrong.
  std::size_t bound_violations = 0;
  std::size_t truncated_records = 0;
};

inline GrowthSummary growth_summary(std::span<const TrajectoryRecord> records,
                                    const NormingTable& table) {
  if (records.empty()) throw std::invalid_argument("growth_summary: no records");
  GrowthSummary s;
  s.records = records.size();
  const std::size_t len = records.front().points.size();
  std::vector<std::vector<double>> holder_by_n(len), growth_by_n(len);
  for (const auto& rec : records) {
    if (rec.truncated) ++s.truncated_records;
    double best = -std::numeric_limits<double>::infinity();
    double worst = std::numeric_limits<double>::infinity();
    const double xk = table.x(rec.horizon);
    for (std::size_t i = 0; i < rec.points.size(); ++i) {
      const auto& pt = rec.points[i];
      best = std::max(best, pt.growth_hat);
      worst = std::min(worst, pt.holder_hat);
      if (i < len) {
        holder_by_n[i].push_back(pt.holder_hat);
        growth_by_n[i].push_back(pt.growth_hat);
      }
      const double cap = std::log(static_cast<double>(pt.z_far) * xk);
      if (std::log(pt.w_hat_spine) > cap + 1e-12) ++s.bound_violations;
    }
    s.max_growth.push_back(best);
    s.min_holder.push_back(worst);
  }
  s.max_growth_q = quantiles(s.max_growth);
  s.min_holder_q = quantiles(s.min_holder);
  for (std::size_t i = 0; i < len; ++i) {
    s.median_holder_by_n.push_back(quantiles(holder_by_n[i]).median);
    s.median_growth_by_n.push_back(quantiles(growth_by_n[i]).median);
  }
  return s;
}

}  // namespace gwspine
