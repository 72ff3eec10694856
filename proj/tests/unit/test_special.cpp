#include <cmath>
#include <cstdint>

#include <gtest/gtest.h>

#include "hnbr/special.hpp"

namespace sp = hnbr::special;

namespace {

long double direct_ratio(std::int64_t y, long double k) {
  long double s = 0.0L;
  for (std::int64_t j = 0; j < y; ++j) s += std::log(static_cast<long double>(j) + k);
  return s;
}

long double direct_digamma_diff(std::int64_t y, long double k) {
  long double s = 0.0L;
  for (std::int64_t j = y - 1; j >= 0; --j) s += 1.0L / (static_cast<long double>(j) + k);
  return s;
}

}  // namespace

TEST(Special, LogGammaMatchesLgammal) {
  for (double x : {1e-6, 0.01, 0.3, 0.5, 1.0, 1.5, 2.0, 3.7, 10.0, 55.5, 1e3, 1e6}) {
    const long double ref = std::lgamma(static_cast<long double>(x));
    EXPECT_NEAR(sp::log_gamma(x), static_cast<double>(ref), 1e-13 * std::max(1.0, std::fabs(static_cast<double>(ref))))
        << "x = " << x;
  }
}

TEST(Special, DigammaKnownValues) {
  const double euler = 0.57721566490153286061;
  EXPECT_NEAR(sp::digamma(1.0), -euler, 1e-14);
  EXPECT_NEAR(sp::digamma(0.5), -euler - 2.0 * std::log(2.0), 1e-13);
  EXPECT_NEAR(sp::digamma(10.0), 2.251752589066721, 1e-13);
}

TEST(Special, DigammaIsDerivativeOfLogGamma) {
  for (double x : {0.2, 1.3, 4.0, 25.0, 300.0}) {
    const long double h = 1e-5L * x;
    const long double lx = static_cast<long double>(x);
    const long double fd = (std::lgamma(lx + h) - std::lgamma(lx - h)) / (2.0L * h);
    EXPECT_NEAR(sp::digamma(x), static_cast<double>(fd), 1e-8 * std::max(1.0, std::fabs(static_cast<double>(fd))));
  }
}

TEST(Special, TrigammaIsDerivativeOfDigamma) {
  for (double x : {0.2, 1.3, 4.0, 25.0}) {
    const double h = 1e-5 * x;
    const double fd = (sp::digamma(x + h) - sp::digamma(x - h)) / (2.0 * h);
    EXPECT_NEAR(sp::trigamma(x), fd, 1e-6 * std::max(1.0, std::fabs(fd)));
  }
}

TEST(Special, RatioAndDigammaDiffMatchFiniteSums) {
  for (double k : {0.05, 0.7, 3.0, 150.0}) {
    for (std::int64_t y : {0, 1, 2, 7, 40, 999, 9999}) {
      const double r = static_cast<double>(direct_ratio(y, k));
      EXPECT_NEAR(sp::log_gamma_ratio(y, k), r, 1e-11 * std::max(1.0, std::fabs(r)));
      const double d = static_cast<double>(direct_digamma_diff(y, k));
      EXPECT_NEAR(sp::digamma_diff(y, k), d, 1e-11 * std::max(1.0, std::fabs(d)));
    }
  }
}

TEST(Special, LargeCountsUseConsistentSeries) {
  // Beyond the finite-sum limit the asymptotic branch must agree with lgammal differences.
  for (double k : {0.5, 4.0, 80.0}) {
    for (std::int64_t y : {sp::kFiniteSumLimit + 1, std::int64_t{250000}, std::int64_t{10000000}}) {
      const long double ly = static_cast<long double>(y);
      const long double ref = std::lgamma(ly + k) - std::lgamma(static_cast<long double>(k));
      EXPECT_NEAR(sp::log_gamma_ratio(y, k), static_cast<double>(ref), 1e-10 * std::fabs(static_cast<double>(ref)));
    }
  }
}

TEST(Special, LogFactorial) {
  EXPECT_DOUBLE_EQ(sp::log_factorial(0), 0.0);
  EXPECT_DOUBLE_EQ(sp::log_factorial(1), 0.0);
  EXPECT_NEAR(sp::log_factorial(10), std::log(3628800.0), 1e-12);
}

TEST(Special, SoftplusAndLogAddExpAreStable) {
  EXPECT_NEAR(sp::softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(sp::softplus(800.0), 800.0);
  EXPECT_GT(sp::softplus(-800.0), -1.0);
  EXPECT_GE(sp::softplus(-800.0), 0.0);
  EXPECT_NEAR(sp::softplus(-30.0), std::exp(-30.0), 1e-25);
  EXPECT_NEAR(sp::log_add_exp(1.0, 2.0), std::log(std::exp(1.0) + std::exp(2.0)), 1e-14);
  EXPECT_DOUBLE_EQ(sp::log_add_exp(1000.0, 1000.0), 1000.0 + std::log(2.0));
}
