#include "hnbr/special.hpp"

#include <cmath>
#include <numbers>

namespace hnbr::special {

namespace {

// Arguments are shifted up to this point before the asymptotic series; the first omitted
// term is then below 1e-16 relative.
constexpr double kShift = 16.0;

}  // namespace

double log_gamma(double x) {
  double prod = 1.0;
  while (x < kShift) {
    prod *= x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv * (1.0 / 12.0 -
             inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
  return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) + series - std::log(prod);
}

double digamma(double x) {
  double shift = 0.0;
  while (x < kShift) {
    shift += 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0)))));
  return std::log(x) - 0.5 * inv - series - shift;
}

double trigamma(double x) {
  double shift = 0.0;
  while (x < kShift) {
    shift += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv + 0.5 * inv2 +
      inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))));
  return series + shift;
}

double log_gamma_ratio(std::int64_t y, double k) {
  if (y <= kFiniteSumLimit) {
    double acc = 0.0;
    for (std::int64_t j = 0; j < y; ++j) acc += std::log(static_cast<double>(j) + k);
    return acc;
  }
  return log_gamma(static_cast<double>(y) + k) - log_gamma(k);
}

double digamma_diff(std::int64_t y, double k) {
  if (y <= kFiniteSumLimit) {
    double acc = 0.0;
    for (std::int64_t j = 0; j < y; ++j) acc += 1.0 / (static_cast<double>(j) + k);
    return acc;
  }
  return digamma(static_cast<double>(y) + k) - digamma(k);
}

double log_factorial(std::int64_t y) { return log_gamma_ratio(y, 1.0); }

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double log_add_exp(double a, double b) {
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace hnbr::special
