#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "gwspine/numeric.hpp"

namespace gwspine::testing {

struct ChiSquare {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t dof = 0;
};

/// Pearson test of observed counts against expected probabilities. Cells
/// with expected count below 5 are pooled into one.
inline ChiSquare chi_square(const std::vector<double>& observed, const std::vector<double>& probs,
                            double n) {
  ChiSquare out;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double e = probs[i] * n;
    if (e < 5.0) {
      pooled_obs += observed[i];
      pooled_exp += e;
      continue;
    }
    out.statistic += (observed[i] - e) * (observed[i] - e) / e;
    ++cells;
  }
  if (pooled_exp > 0.0) {
    out.statistic += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++cells;
  }
  out.dof = cells - 1;
  boost::math::chi_squared dist(static_cast<double>(out.dof));
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
  CompensatedSum s;
  for (double x : xs) s += x;
  const double n = static_cast<double>(xs.size());
  const double mean = s.value() / n;
  CompensatedSum v;
  for (double x : xs) v += (x - mean) * (x - mean);
  return {mean, std::sqrt(v.value() / (n - 1.0) / n)};
}

/// sum_{j >= 1} (1 - 2^-j) / j^2, summed to double precision.
inline double dyadic_mean_series() {
  long double acc = 0.0L;
  for (int j = 200000; j >= 1; --j) {
    const long double jj = j;
    acc += (1.0L - std::pow(2.0L, -jj)) / (jj * jj);
  }
  // Tail beyond 200000 of 1/j^2 is about 1/200000.
  acc += 1.0L / 200000.5L;
  return static_cast<double>(acc);
}

/// sum_{j >= 1} 2^-j / j^2 (converges fast).
inline double dyadic_weight_series() {
  long double acc = 0.0L;
  for (int j = 80; j >= 1; --j) {
    const long double jj = j;
    acc += std::pow(2.0L, -jj) / (jj * jj);
  }
  return static_cast<double>(acc);
}

}  // namespace gwspine::testing
