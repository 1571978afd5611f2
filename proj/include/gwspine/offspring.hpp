#pragma once

// Offspring laws on the positive integers (no leaves, mean in (1, inf)).

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gwspine/discrete_table.hpp"
#include "gwspine/numeric.hpp"
#include "gwspine/random.hpp"

namespace gwspine {

struct Deterministic {
  std::uint64_t k;
};

/// masses[i] is the probability of i + 1 children.
struct FiniteSupport {
  std::vector<double> masses;
};

/// P(nu = l) = p (1 - p)^(l - 1), l >= 1.
struct ShiftedGeometric {
  double p;
};

/// Mass scale * 2^-j / j^2 on 2^j (j >= 1); the rest on 1.
/// E[nu] is finite but E[nu ln nu] = scale * ln2 * sum 1/j diverges.
struct DyadicPowerLog {
  double scale;
};

using Family = std::variant<Deterministic, FiniteSupport, ShiftedGeometric, DyadicPowerLog>;

/// Upper limit (exclusive) on the mean of the dyadic family: pmf(1) >= 0.
inline constexpr double kDyadicMaxMean =
    1.0 + (kPi * kPi / 6.0 - kDilogHalf) / kDilogHalf;

class OffspringLaw {
public:
  static OffspringLaw deterministic(std::uint64_t k) {
    if (k < 2) throw std::invalid_argument("deterministic law needs k >= 2");
    return OffspringLaw(Deterministic{k});
  }

  static OffspringLaw finite(std::vector<double> masses) {
    CompensatedSum total;
    for (double p : masses) {
      if (!(p >= 0.0) || p > 1.0) throw std::invalid_argument("finite law: mass outside [0,1]");
      total += p;
    }
    if (std::abs(total.value() - 1.0) > 1e-12) {
      throw std::invalid_argument("finite law: masses must sum to 1");
    }
    while (!masses.empty() && masses.back() == 0.0) masses.pop_back();
    OffspringLaw law(FiniteSupport{std::move(masses)});
    if (!(law.mean() > 1.0)) throw std::invalid_argument("finite law: mean must exceed 1");
    return law;
  }

  static OffspringLaw geometric(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("geometric law needs p in (0,1)");
    return OffspringLaw(ShiftedGeometric{p});
  }

  /// Dyadic power-log law with the given mean.
  static OffspringLaw dyadic(double target_mean) {
    if (!(target_mean > 1.0 && target_mean < kDyadicMaxMean)) {
      throw std::out_of_range("dyadic law: mean must lie in (1, " +
                              format_double(kDyadicMaxMean) + ")");
    }
    // m = 1 + C (pi^2/6 - Li2(1/2)) exactly, since sum_j j^-2 = pi^2/6.
    const double scale = (target_mean - 1.0) / (kPi * kPi / 6.0 - kDilogHalf);
    return OffspringLaw(DyadicPowerLog{scale});
  }

  [[nodiscard]] const Family& family() const { return family_; }
  [[nodiscard]] double mean() const { return mean_; }
  [[nodiscard]] bool xlogx_finite() const {
    return !std::holds_alternative<DyadicPowerLog>(family_);
  }
  [[nodiscard]] bool finite_support() const {
    return std::holds_alternative<Deterministic>(family_) ||
           std::holds_alternative<FiniteSupport>(family_);
  }

  /// Largest support point, for finite-support laws.
  [[nodiscard]] std::uint64_t max_support() const {
    if (auto* d = std::get_if<Deterministic>(&family_)) return d->k;
    if (auto* f = std::get_if<FiniteSupport>(&family_)) return f->masses.size();
    throw std::logic_error("max_support: infinite support");
  }

  [[nodiscard]] double pmf(std::uint64_t l) const {
    if (l == 0) return 0.0;
    return std::visit([l](const auto& f) { return pmf_of(f, static_cast<double>(l)); }, family_);
  }

  /// Sum over l <= L of q_l.
  [[nodiscard]] double cdf(std::uint64_t L) const {
    CompensatedSum acc;
    for_each_support(1.0, [&](double l, double q) {
      if (l > static_cast<double>(L)) return false;
      acc += q;
      return true;
    });
    return acc.value();
  }

  /// Upper bound on sum_{l > L} q_l.
  [[nodiscard]] double tail_mass(double L) const {
    return std::visit([L](const auto& f) { return tail_mass_of(f, L); }, family_);
  }

  /// Upper bound on sum_{l > L} l q_l.
  [[nodiscard]] double tail_first_moment(double L) const {
    return std::visit([L](const auto& f) { return tail_moment_of(f, L); }, family_);
  }

  /// Visit support points l >= from in increasing order as (l, q_l);
  /// the callback returns false to stop. l is passed as a double so that
  /// series can run past the uint64 range.
  template <class F>
  void for_each_support(double from, F&& f) const {
    std::visit([&](const auto& fam) { visit_support(fam, from, f); }, family_);
  }

  [[nodiscard]] const DiscreteTable& table() const { return *table_; }

  /// Canonical spec string, e.g. "geometric:p=0.5".
  [[nodiscard]] std::string spec() const {
    return std::visit([this](const auto& f) { return spec_of(f); }, family_);
  }

  [[nodiscard]] std::string family_name() const {
    switch (family_.index()) {
      case 0: return "deterministic";
      case 1: return "finite";
      case 2: return "geometric";
      default: return "dyadic";
    }
  }

private:
  explicit OffspringLaw(Family fam) : family_(std::move(fam)) {
    if (auto* d = std::get_if<DyadicPowerLog>(&family_)) {
      mean_ = 1.0 + d->scale * (kPi * kPi / 6.0 - kDilogHalf);
    } else if (auto* g = std::get_if<ShiftedGeometric>(&family_)) {
      mean_ = 1.0 / g->p;
    } else {
      CompensatedSum m;
      for_each_support(1.0, [&](double l, double q) {
        m += l * q;
        return true;
      });
      mean_ = m.value();
    }
    build_table();
  }

  void build_table() {
    std::vector<std::pair<std::uint64_t, double>> points;
    double tail = 0.0;
    for_each_support(1.0, [&](double l, double q) {
      if (l > static_cast<double>(kMaxSupportValue)) {
        throw std::overflow_error("offspring table exceeds the representable support");
      }
      points.emplace_back(static_cast<std::uint64_t>(l), q);
      tail = tail_mass(l);
      return tail >= kTableTailMass;
    });
    table_ = std::make_shared<const DiscreteTable>(std::move(points), tail);
  }

  static double pmf_of(const Deterministic& d, double l) {
    return l == static_cast<double>(d.k) ? 1.0 : 0.0;
  }
  static double pmf_of(const FiniteSupport& f, double l) {
    return l <= static_cast<double>(f.masses.size()) ? f.masses[static_cast<std::size_t>(l) - 1]
                                                     : 0.0;
  }
  static double pmf_of(const ShiftedGeometric& g, double l) {
    return g.p * std::pow(1.0 - g.p, l - 1.0);
  }
  static double pmf_of(const DyadicPowerLog& d, double l) {
    if (l == 1.0) return 1.0 - d.scale * kDilogHalf;
    int exponent = 0;
    const double mant = std::frexp(l, &exponent);
    if (mant != 0.5 || exponent < 2) return 0.0;
    const double j = exponent - 1;
    return d.scale * std::ldexp(1.0, -(exponent - 1)) / (j * j);
  }

  static double tail_mass_of(const Deterministic& d, double L) {
    return L < static_cast<double>(d.k) ? 1.0 : 0.0;
  }
  static double tail_mass_of(const FiniteSupport& f, double L) {
    CompensatedSum acc;
    for (std::size_t i = f.masses.size(); i-- > 0;) {
      if (static_cast<double>(i + 1) <= L) break;
      acc += f.masses[i];
    }
    return acc.value();
  }
  static double tail_mass_of(const ShiftedGeometric& g, double L) {
    if (L < 1.0) return 1.0;
    return std::pow(1.0 - g.p, std::floor(L));
  }
  static double tail_mass_of(const DyadicPowerLog& d, double L) {
    if (L < 1.0) return 1.0;
    const double J = std::floor(std::log2(L));
    // sum_{j>J} 2^-j / j^2 <= 2^-J / (J+1)^2
    return d.scale * std::exp2(-J) / ((J + 1.0) * (J + 1.0));
  }

  static double tail_moment_of(const Deterministic& d, double L) {
    return L < static_cast<double>(d.k) ? static_cast<double>(d.k) : 0.0;
  }
  static double tail_moment_of(const FiniteSupport& f, double L) {
    CompensatedSum acc;
    for (std::size_t i = f.masses.size(); i-- > 0;) {
      if (static_cast<double>(i + 1) <= L) break;
      acc += static_cast<double>(i + 1) * f.masses[i];
    }
    return acc.value();
  }
  static double tail_moment_of(const ShiftedGeometric& g, double L) {
    const double n = L < 1.0 ? 0.0 : std::floor(L);
    return std::pow(1.0 - g.p, n) * (n + 1.0 / g.p);
  }
  static double tail_moment_of(const DyadicPowerLog& d, double L) {
    if (L < 2.0) {
      const double rest = kPi * kPi / 6.0 * d.scale;
      return L < 1.0 ? rest + (1.0 - d.scale * kDilogHalf) : rest;
    }
    const double J = std::floor(std::log2(L));
    return d.scale / J;  // sum_{j>J} j^-2 < 1/J
  }

  template <class F>
  static void visit_support(const Deterministic& d, double from, F& f) {
    if (static_cast<double>(d.k) >= from) f(static_cast<double>(d.k), 1.0);
  }
  template <class F>
  static void visit_support(const FiniteSupport& fs, double from, F& f) {
    for (std::size_t i = 0; i < fs.masses.size(); ++i) {
      const double l = static_cast<double>(i + 1);
      if (l < from || fs.masses[i] == 0.0) continue;
      if (!f(l, fs.masses[i])) return;
    }
  }
  template <class F>
  static void visit_support(const ShiftedGeometric& g, double from, F& f) {
    double l = std::max(1.0, std::ceil(from));
    const double log_ratio = std::log1p(-g.p);
    for (;; l += 1.0) {
      const double q = g.p * std::exp((l - 1.0) * log_ratio);
      if (q == 0.0 || !f(l, q)) return;
    }
  }
  template <class F>
  static void visit_support(const DyadicPowerLog& d, double from, F& f) {
    if (from <= 1.0) {
      if (!f(1.0, 1.0 - d.scale * kDilogHalf)) return;
    }
    int j = from <= 2.0 ? 1 : static_cast<int>(std::ceil(std::log2(from)));
    for (; j < 1000; ++j) {
      const double dj = j;
      if (!f(std::ldexp(1.0, j), d.scale * std::ldexp(1.0, -j) / (dj * dj))) return;
    }
  }

  static std::string spec_of(const Deterministic& d) {
    return "deterministic:k=" + std::to_string(d.k);
  }
  static std::string spec_of(const FiniteSupport& f) {
    std::string out = "finite:";
    for (std::size_t i = 0; i < f.masses.size(); ++i) {
      if (i) out += ',';
      out += format_double(f.masses[i]);
    }
    return out;
  }
  static std::string spec_of(const ShiftedGeometric& g) {
    return "geometric:p=" + format_double(g.p);
  }
  std::string spec_of(const DyadicPowerLog&) const { return "dyadic:m=" + format_double(mean_); }

  Family family_;
  double mean_ = 0.0;
  std::shared_ptr<const DiscreteTable> table_;
};

/// Same as OffspringLaw::dyadic; rejects means outside (1, kDyadicMaxMean).
inline OffspringLaw make_dyadic_power_log(double target_mean) {
  return OffspringLaw::dyadic(target_mean);
}

/// Exact inverse-CDF draw.
inline std::uint64_t sample(const OffspringLaw& law, Rng& rng) { return law.table().sample(rng); }

/// sum_{l <= L} l ln(l) q_l.
inline double xlogx_partial_sum(const OffspringLaw& law, std::uint64_t L) {
  CompensatedSum acc;
  law.for_each_support(1.0, [&](double l, double q) {
    if (l > static_cast<double>(L)) return false;
    acc += l * std::log(l) * q;
    return true;
  });
  return acc.value();
}

}  // namespace gwspine
