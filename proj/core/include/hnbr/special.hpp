#pragma once

#include <cstdint>

namespace hnbr::special {

/// Responses above this count switch from exact finite sums to asymptotic series.
inline constexpr std::int64_t kFiniteSumLimit = 10000;

/// log Gamma(x) for x > 0 via upward recurrence and the Stirling series.
double log_gamma(double x);

/// Digamma psi(x) for x > 0.
double digamma(double x);

/// Trigamma psi'(x) for x > 0.
double trigamma(double x);

/// log Gamma(y + k) - log Gamma(k) = sum_{j<y} log(j + k) for integer y >= 0.
double log_gamma_ratio(std::int64_t y, double k);

/// psi(y + k) - psi(k) = sum_{j<y} 1 / (j + k) for integer y >= 0.
double digamma_diff(std::int64_t y, double k);

/// log(y!).
double log_factorial(std::int64_t y);

/// log(1 + exp(x)) without overflow.
double softplus(double x);

/// log(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b);

}  // namespace hnbr::special
