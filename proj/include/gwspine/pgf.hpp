#pragma once

// Generating function of the offspring law, its iterates' inverses and the
// Seneta-Heyde norming constants c_n = -1 / ln(phi_n^{-1}(s)).
//
// Inverse points are never stored directly: phi_n^{-1}(s) is within m^-n of
// 1, so the table keeps x_n = -ln phi_n^{-1}(s) = 1 / c_n and every series is
// written in terms of x via expm1/log1p.

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gwspine/numeric.hpp"
#include "gwspine/offspring.hpp"

namespace gwspine {

namespace detail {

inline void require_open_unit(double s, const char* what) {
  if (!(s > 0.0 && s < 1.0)) {
    throw std::domain_error(std::string(what) + ": argument must lie in (0,1)");
  }
}

}  // namespace detail

/// phi(s) = sum q_l s^l.
inline double pgf_eval(const OffspringLaw& law, double s) {
  detail::require_open_unit(s, "pgf_eval");
  CompensatedSum acc;
  const double log_s = std::log(s);
  law.for_each_support(1.0, [&](double l, double q) {
    acc += q * std::exp(l * log_s);
    return law.tail_mass(l) * std::exp(l * log_s) > 1e-18;
  });
  return acc.value();
}

/// phi'(s) = sum l q_l s^(l-1).
inline double pgf_derivative(const OffspringLaw& law, double s) {
  detail::require_open_unit(s, "pgf_derivative");
  CompensatedSum acc;
  const double log_s = std::log(s);
  law.for_each_support(1.0, [&](double l, double q) {
    acc += l * q * std::exp((l - 1.0) * log_s);
    return law.tail_first_moment(l) * std::exp(l * log_s) > 1e-18;
  });
  return acc.value();
}

/// -ln phi(e^-x) for x > 0, accurate to a few ulps even when x is tiny.
inline double neg_log_pgf(const OffspringLaw& law, double x) {
  // phi(e^-x) - 1 = sum q_l expm1(-l x); every term has the same sign.
  CompensatedSum acc;
  law.for_each_support(1.0, [&](double l, double q) {
    acc += q * std::expm1(-l * x);
    return law.tail_mass(l) > 1e-18 * std::abs(acc.value());
  });
  if (acc.value() > -0.5) return -std::log1p(acc.value());

  // phi is small: sum q_l e^{-(l - l0) x} directly, factoring out the first term.
  double l0 = 0.0;
  CompensatedSum scaled;
  law.for_each_support(1.0, [&](double l, double q) {
    if (q == 0.0) return true;
    if (l0 == 0.0) l0 = l;
    scaled += q * std::exp(-(l - l0) * x);
    return law.tail_mass(l) * std::exp(-(l + 1.0 - l0) * x) > 1e-18 * scaled.value();
  });
  return l0 * x - std::log(scaled.value());
}

/// ln phi'(e^-x) for x > 0, with the first support point factored out.
inline double log_pgf_derivative(const OffspringLaw& law, double x) {
  double l0 = 0.0, w0 = 0.0;
  CompensatedSum acc;
  law.for_each_support(1.0, [&](double l, double q) {
    if (q == 0.0) return true;
    if (l0 == 0.0) {
      l0 = l;
      w0 = l * q;
    }
    acc += l * q / w0 * std::exp(-(l - l0) * x);
    return std::exp(-(l + 1.0 - l0) * x) * law.tail_first_moment(l) > 1e-18 * w0 * acc.value();
  });
  return std::log(w0) - (l0 - 1.0) * x + std::log(acc.value());
}

/// Solves -ln phi(e^-x) = y for x, i.e. x = -ln phi^{-1}(e^-y).
///
/// The map is strictly increasing, with y/m <= root < y. Illinois
/// regula falsi with a bisection fallback, run to full relative precision.
inline double invert_pgf_log(const OffspringLaw& law, double y) {
  if (!(y > 0.0) || !std::isfinite(y)) {
    throw std::domain_error("invert_pgf_log: target must be a positive real");
  }
  constexpr int kMaxIterations = 200;
  double lo = y / (1.5 * law.mean());
  double hi = y;
  double f_lo = neg_log_pgf(law, lo) - y;
  double f_hi = neg_log_pgf(law, hi) - y;
  for (int widen = 0; f_lo > 0.0 && widen < 64; ++widen) {
    lo *= 0.5;
    f_lo = neg_log_pgf(law, lo) - y;
  }
  if (f_lo == 0.0) return lo;
  if (f_hi <= 0.0 || f_lo > 0.0) {
    throw std::runtime_error("invert_pgf_log: root not bracketed");
  }

  int side = 0;
  for (int it = 0; it < kMaxIterations; ++it) {
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      return 0.5 * (lo + hi);
    }
    double x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    const double width = hi - lo;
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    const double fx = neg_log_pgf(law, x) - y;
    if (fx == 0.0) return x;
    if (fx < 0.0) {
      lo = x;
      f_lo = fx;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    } else {
      hi = x;
      f_hi = fx;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
    // Regula falsi stalls on one side; force a bisection when it does.
    if (hi - lo > 0.5 * width) {
      const double mid = 0.5 * (lo + hi);
      const double fm = neg_log_pgf(law, mid) - y;
      if (fm == 0.0) return mid;
      if (fm < 0.0) {
        lo = mid;
        f_lo = fm;
      } else {
        hi = mid;
        f_hi = fm;
      }
      side = 0;
    }
  }
  throw std::runtime_error("invert_pgf_log: no convergence within iteration cap");
}

struct NormingRow {
  double x;      ///< -ln phi_n^{-1}(s) = 1 / c_n
  double c;      ///< c_n
  double log_d;  ///< ln phi_n'(phi_n^{-1}(s))
  double log_d_step = 0.0;  ///< ln D_n - ln D_{n-1} = ln phi'(e^-x_n)
};

class NormingTable {
public:
  NormingTable(double s, std::vector<NormingRow> rows) : s_(s), rows_(std::move(rows)) {}

  [[nodiscard]] double s() const { return s_; }
  /// Last generation available.
  [[nodiscard]] std::size_t depth() const { return rows_.size() - 1; }
  [[nodiscard]] const std::vector<NormingRow>& rows() const { return rows_; }
  [[nodiscard]] const NormingRow& row(std::size_t n) const {
    if (n >= rows_.size()) throw std::out_of_range("norming table horizon exceeded");
    return rows_[n];
  }
  [[nodiscard]] double x(std::size_t n) const { return row(n).x; }
  [[nodiscard]] double c(std::size_t n) const { return row(n).c; }
  [[nodiscard]] double log_d(std::size_t n) const { return row(n).log_d; }
  [[nodiscard]] double log_d_step(std::size_t n) const { return row(n).log_d_step; }

private:
  double s_;
  std::vector<NormingRow> rows_;
};

/// Rows 0..depth. x_n = invert(x_{n-1}); lnD_n = lnD_{n-1} + ln phi'(e^-x_n).
inline NormingTable build_norming_table(const OffspringLaw& law, double s, std::size_t depth) {
  detail::require_open_unit(s, "build_norming_table");
  std::vector<NormingRow> rows;
  rows.reserve(depth + 1);
  double x = -std::log(s);
  CompensatedSum log_d;
  rows.push_back({x, 1.0 / x, 0.0});
  for (std::size_t n = 1; n <= depth; ++n) {
    x = invert_pgf_log(law, x);
    const double step = log_pgf_derivative(law, x);
    log_d += step;
    rows.push_back({x, 1.0 / x, log_d.value(), step});
  }
  return NormingTable(s, std::move(rows));
}

struct RatioRow {
  std::size_t n;
  double c_ratio;  ///< c_{n+1} / c_n
  double d_ratio;  ///< D_{n+1} / D_n
};

inline std::vector<RatioRow> ratio_diagnostics(const NormingTable& table) {
  if (table.rows().size() < 2) {
    throw std::invalid_argument("ratio_diagnostics: need at least two rows");
  }
  std::vector<RatioRow> out;
  for (std::size_t n = 0; n + 1 < table.rows().size(); ++n) {
    out.push_back({n, table.x(n) / table.x(n + 1),
                   std::exp(table.log_d_step(n + 1))});
  }
  return out;
}

/// Columns n,x,c,lnD,c_ratio,D_ratio; the ratio fields of the last row are empty.
inline void write_norming_csv(const NormingTable& table, std::ostream& os) {
  os << "n,x,c,lnD,c_ratio,D_ratio\n";
  const auto& rows = table.rows();
  for (std::size_t n = 0; n < rows.size(); ++n) {
    os << n << ',' << format_double(rows[n].x) << ',' << format_double(rows[n].c) << ','
       << format_double(rows[n].log_d) << ',';
    if (n + 1 < rows.size()) {
      os << format_double(rows[n].x / rows[n + 1].x) << ','
         << format_double(std::exp(rows[n + 1].log_d_step));
    } else {
      os << ',';
    }
    os << '\n';
  }
}

}  // namespace gwspine
