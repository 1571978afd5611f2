#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gwspine/numeric.hpp"
#include "gwspine/random.hpp"

namespace gwspine {

/// Mass left untabulated. Below the 2^-53 resolution of `uniform01`, so an
/// inverse-CDF draw never needs a point past the table.
inline constexpr double kTableTailMass = 0x1.0p-64;

/// Largest child count a table may hold; population sums stay in uint64.
inline constexpr std::uint64_t kMaxSupportValue = std::uint64_t{1} << 62;

/// Tabulated law on positive integers, used for exact inverse-CDF sampling
/// and for exact multinomial aggregation of i.i.d. draws.
class DiscreteTable {
public:
  DiscreteTable() = default;

  /// `points` must be increasing in value with nonnegative masses.
  /// `tail_bound` is an upper bound on the mass beyond the last point.
  DiscreteTable(std::vector<std::pair<std::uint64_t, double>> points, double tail_bound)
      : tail_bound_(tail_bound) {
    values_.reserve(points.size());
    mass_.reserve(points.size());
    for (const auto& [v, p] : points) {
      if (p <= 0.0) continue;
      if (!values_.empty() && v <= values_.back()) {
        throw std::invalid_argument("DiscreteTable: support must be increasing");
      }
      values_.push_back(v);
      mass_.push_back(p);
    }
    if (values_.empty()) throw std::invalid_argument("DiscreteTable: empty support");

    cdf_.resize(mass_.size());
    CompensatedSum acc;
    for (std::size_t i = 0; i < mass_.size(); ++i) {
      acc += mass_[i];
      cdf_[i] = acc.value();
    }
    // Conditional masses p_i / P(X >= v_i), accumulated from the far end so
    // small suffixes keep full relative precision.
    conditional_.resize(mass_.size());
    CompensatedSum suffix;
    for (std::size_t i = mass_.size(); i-- > 0;) {
      suffix += mass_[i];
      conditional_[i] = std::min(1.0, mass_[i] / suffix.value());
    }
    conditional_.back() = 1.0;
  }

  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] const std::vector<std::uint64_t>& values() const { return values_; }
  [[nodiscard]] const std::vector<double>& masses() const { return mass_; }
  [[nodiscard]] double total_mass() const { return cdf_.back(); }
  [[nodiscard]] double tail_bound() const { return tail_bound_; }
  [[nodiscard]] std::uint64_t max_value() const { return values_.back(); }

  /// Least tabulated value whose CDF reaches `u`. A `u` above the tabulated
  /// total (a normalization defect of order 1e-13 at most) maps to the last
  /// point.
  [[nodiscard]] std::uint64_t inverse_cdf(double u) const {
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) return values_.back();
    return values_[static_cast<std::size_t>(it - cdf_.begin())];
  }

  [[nodiscard]] std::uint64_t sample(Rng& rng) const { return inverse_cdf(uniform01(rng)); }

  /// Sum of `count` i.i.d. draws. Small counts draw individually; larger
  /// counts draw the multinomial occupation vector by conditional binomials.
  /// Saturates at `kMaxPopulation` and reports it through `saturated`.
  [[nodiscard]] std::uint64_t sample_sum(std::uint64_t count, Rng& rng, bool& saturated) const {
    if (count == 0) return 0;
    std::uint64_t total = 0;
    auto add = [&](std::uint64_t value, std::uint64_t times) {
      if (times == 0) return;
      if (value > (kMaxPopulation - total) / times) {
        total = kMaxPopulation;
        saturated = true;
      } else {
        total += value * times;
      }
    };
    if (count <= kDirectDrawLimit) {
      for (std::uint64_t i = 0; i < count && !saturated; ++i) add(sample(rng), 1);
      return total;
    }
    std::uint64_t remaining = count;
    for (std::size_t i = 0; i < values_.size() && remaining > 0; ++i) {
      std::uint64_t hits = remaining;
      if (conditional_[i] < 1.0) {
        std::binomial_distribution<std::uint64_t> binom(remaining, conditional_[i]);
        hits = binom(rng);
      }
      add(values_[i], hits);
      remaining -= hits;
    }
    return total;
  }

  static constexpr std::uint64_t kMaxPopulation = std::uint64_t{1} << 62;
  static constexpr std::uint64_t kDirectDrawLimit = 32;

private:
  std::vector<std::uint64_t> values_;
  std::vector<double> mass_;
  std::vector<double> cdf_;
  std::vector<double> conditional_;
  double tail_bound_ = 0.0;
};

}  // namespace gwspine
