#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include <gtest/gtest.h>

#include "gwspine/offspring.hpp"
#include "gwspine/pgf.hpp"

namespace {

using namespace gwspine;

// Shifted geometric with p = 1/m iterates linear-fractionally:
// phi_n^{-1}(s) = s m^n / (1 + (m^n - 1) s), i.e. 2^n / (2^n + 1) at m = 2, s = 1/2.
double geometric_c(int n) { return 1.0 / std::log1p(std::ldexp(1.0, -n)); }
double geometric_d(int n) {
  const double two_n = std::ldexp(1.0, n);
  return std::ldexp(1.0, -n) * (two_n + 1.0) * (two_n + 1.0) / 4.0;
}

TEST(Pgf, EvaluationExamples) {
  EXPECT_NEAR(pgf_eval(OffspringLaw::deterministic(2), 0.5), 0.25, 1e-15);
  EXPECT_NEAR(pgf_eval(OffspringLaw::geometric(0.5), 0.5), 1.0 / 3.0, 1e-15);
  const auto dy = make_dyadic_power_log(2.0);
  double prev = 0.0;
  for (double s : {0.9, 0.99, 0.999, 0.99999, 0.9999999}) {
    const double v = pgf_eval(dy, s);
    EXPECT_GT(v, prev);
    EXPECT_LT(v, s);
    prev = v;
  }
  EXPECT_GT(prev, 0.99999);
}

TEST(Pgf, DerivativeExamples) {
  EXPECT_NEAR(pgf_derivative(OffspringLaw::deterministic(2), 0.5), 1.0, 1e-15);
  const auto geo = OffspringLaw::geometric(0.5);
  EXPECT_NEAR(pgf_derivative(geo, 2.0 / 3.0), 1.125, 1e-14);
  EXPECT_NEAR(pgf_derivative(geo, 0.8), 25.0 / 18.0, 1e-14);
  EXPECT_LT(pgf_derivative(make_dyadic_power_log(2.0), 0.999999), 2.0);
}

TEST(Pgf, DomainErrors) {
  const auto geo = OffspringLaw::geometric(0.5);
  for (double s : {0.0, 1.0, -0.5, 1.5}) {
    EXPECT_THROW((void)pgf_eval(geo, s), std::domain_error);
    EXPECT_THROW((void)pgf_derivative(geo, s), std::domain_error);
  }
  EXPECT_THROW((void)invert_pgf_log(geo, 0.0), std::domain_error);
  EXPECT_THROW((void)build_norming_table(geo, 1.0, 3), std::domain_error);
}

TEST(Pgf, InversionExamples) {
  EXPECT_NEAR(invert_pgf_log(OffspringLaw::deterministic(2), std::log(2.0)), std::log(2.0) / 2.0, 1e-16);
  EXPECT_NEAR(invert_pgf_log(OffspringLaw::geometric(0.5), std::log(2.0)), std::log(1.5), 1e-15);
  for (const auto& law : {OffspringLaw::geometric(0.5), OffspringLaw::finite({0.3, 0.3, 0.4})}) {
    const double y = 1e-9;
    EXPECT_NEAR(invert_pgf_log(law, y) / (y / law.mean()), 1.0, 1e-6) << law.spec();
  }
  // Without an x log x moment the small-y slope approaches 1/m only logarithmically.
  const auto dy = make_dyadic_power_log(2.0);
  double prev = INFINITY;
  for (double y : {1e-3, 1e-6, 1e-9, 1e-12, 1e-15}) {
    const double ratio = invert_pgf_log(dy, y) / (y / 2.0);
    EXPECT_GT(ratio, 1.0);
    EXPECT_LT(ratio, prev);
    prev = ratio;
  }
  EXPECT_LT(prev, 1.02);
}

TEST(Pgf, InversionResidual) {
  for (const auto& law : {OffspringLaw::geometric(0.5), OffspringLaw::geometric(0.1),
                          make_dyadic_power_log(2.0), make_dyadic_power_log(1.2),
                          OffspringLaw::deterministic(5), OffspringLaw::finite({0.5, 0.5})}) {
    for (double y : {1e-12, 1e-6, 0.01, 0.5, 3.0, 40.0}) {
      const double x = invert_pgf_log(law, y);
      EXPECT_LT(x, y);
      EXPECT_GT(x, 0.0);
      EXPECT_LT(std::abs(neg_log_pgf(law, x) - y), 1e-13 * std::max(1.0, y)) << law.spec() << " y=" << y;
    }
  }
}

TEST(Norming, DeterministicBinaryClosedForm) {
  const auto table = build_norming_table(OffspringLaw::deterministic(2), 0.5, 40);
  EXPECT_NEAR(table.c(0), 1.442695040888963, 1e-15);
  EXPECT_NEAR(table.c(1), 2.885390081777927, 1e-15);
  EXPECT_NEAR(std::exp(table.log_d(1)), std::sqrt(2.0), 1e-15);
  for (int n = 0; n <= 40; ++n) {
    const double c = std::ldexp(1.0, n) / std::log(2.0);
    EXPECT_NEAR(table.c(n) / c, 1.0, 1e-14);
    // ln D_n = n ln2 + (1 - 2^-n) ln(1/2).
    const double log_d = n * std::log(2.0) + (1.0 - std::ldexp(1.0, -n)) * std::log(0.5);
    EXPECT_NEAR(table.log_d(n), log_d, 1e-13);
  }
  for (const auto& r : ratio_diagnostics(table)) EXPECT_DOUBLE_EQ(r.c_ratio, 2.0);
}

TEST(Norming, GeometricClosedFormToDepth40) {
  const auto table = build_norming_table(OffspringLaw::geometric(0.5), 0.5, 40);
  EXPECT_NEAR(table.c(1), 2.466303, 1e-6);
  EXPECT_NEAR(table.c(2), 4.481420, 1e-6);
  EXPECT_NEAR(std::exp(table.log_d(1)), 9.0 / 8.0, 1e-15);
  EXPECT_NEAR(std::exp(table.log_d(2)), 25.0 / 16.0, 1e-15);
  for (int n = 0; n <= 40; ++n) {
    EXPECT_LT(std::abs(table.c(n) / geometric_c(n) - 1.0), 1e-10) << n;
    EXPECT_LT(std::abs(std::exp(table.log_d(n)) / geometric_d(n) - 1.0), 1e-10) << n;
  }
}

TEST(Norming, DepthZeroIsSingleRow) {
  const auto table = build_norming_table(make_dyadic_power_log(2.0), 0.3, 0);
  EXPECT_EQ(table.rows().size(), 1u);
  EXPECT_EQ(table.x(0), -std::log(0.3));
  EXPECT_EQ(table.log_d(0), 0.0);
  EXPECT_THROW((void)table.row(1), std::out_of_range);
  EXPECT_THROW((void)ratio_diagnostics(table), std::invalid_argument);
}

TEST(Norming, GeometricRatios) {
  const auto table = build_norming_table(OffspringLaw::geometric(0.5), 0.5, 40);
  const auto ratios = ratio_diagnostics(table);
  EXPECT_NEAR(ratios[1].d_ratio, 25.0 / 18.0, 1e-14);
  EXPECT_LT(std::abs(ratios[20].c_ratio - 2.0), 1e-4);
  EXPECT_LT(std::abs(ratios[20].d_ratio - 2.0), 1e-4);
  for (std::size_t n = 1; n + 1 < ratios.size(); ++n) {
    EXPECT_LE(std::abs(ratios[n + 1].d_ratio - ratios[n + 1].c_ratio),
              std::abs(ratios[n].d_ratio - ratios[n].c_ratio) + 1e-14);
  }
}

TEST(Norming, StructuralInvariants) {
  for (const auto& law : {OffspringLaw::geometric(0.5), make_dyadic_power_log(2.0),
                          make_dyadic_power_log(1.3), OffspringLaw::finite({0.5, 0.5})}) {
    for (double s : {0.3, 0.5, 0.7}) {
      const auto table = build_norming_table(law, s, 40);
      EXPECT_EQ(table.x(0), -std::log(s));
      EXPECT_EQ(table.log_d(0), 0.0);
      for (std::size_t n = 0; n < 40; ++n) {
        EXPECT_LT(table.x(n + 1), table.x(n));
        EXPECT_GT(table.c(n + 1), table.c(n));
        EXPECT_LT(table.x(n), law.mean() * table.x(n + 1));
        // phi(phi_{n+1}^{-1}(s)) = phi_n^{-1}(s), rechecked with plain pgf_eval.
        const double t = std::exp(-table.x(n + 1));
        if (t < 1.0) {
          EXPECT_NEAR(pgf_eval(law, t), std::exp(-table.x(n)), 1e-12);
        }
        EXPECT_NEAR(neg_log_pgf(law, table.x(n + 1)), table.x(n), 1e-13 * std::max(1.0, table.x(n)));
      }
    }
  }
}

TEST(Norming, DyadicRatioApproachesMean) {
  const auto table = build_norming_table(make_dyadic_power_log(2.0), 0.5, 40);
  const auto ratios = ratio_diagnostics(table);
  EXPECT_LT(std::abs(ratios[39].c_ratio - 2.0), 0.05);
  for (std::size_t n = 5; n + 1 < ratios.size(); ++n) {
    EXPECT_GT(ratios[n + 1].c_ratio, ratios[n].c_ratio);
    EXPECT_LT(ratios[n].c_ratio, 2.0);
  }
}

TEST(Norming, CsvSchema) {
  const auto table = build_norming_table(OffspringLaw::deterministic(2), 0.5, 2);
  std::ostringstream os;
  write_norming_csv(table, os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "n,x,c,lnD,c_ratio,D_ratio");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 2), "0,");
  EXPECT_NE(line.find(",2,"), std::string::npos);
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

}  // namespace
