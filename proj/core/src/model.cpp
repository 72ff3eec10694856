#include "hnbr/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hnbr/error.hpp"
#include "hnbr/special.hpp"

namespace hnbr {

namespace {

void check_dims(const Dataset& data, const Coefficients& theta) {
  if (theta.theta1.size() != data.p() || theta.theta2.size() != data.p()) {
    throw ArgumentError("coefficient blocks have length " + std::to_string(theta.theta1.size()) +
                        "/" + std::to_string(theta.theta2.size()) + " but the design has " +
                        std::to_string(data.p()) + " columns");
  }
}

// s = intercept + X * beta, touching only the nonzero columns of beta.
Vector predictor(const Matrix& X, const Vector& beta, double intercept, double scale) {
  Vector s = Vector::Constant(X.rows(), intercept);
  for (Index j = 0; j < beta.size(); ++j) {
    if (beta[j] != 0.0) s.noalias() += (scale * beta[j]) * X.col(j);
  }
  return s;
}

}  // namespace

Dataset::Dataset(Matrix X_, std::vector<std::int64_t> y_, std::vector<std::string> names)
    : X(std::move(X_)), y(std::move(y_)), feature_names(std::move(names)) {
  validate();
}

void Dataset::validate() const {
  if (X.rows() < 1 || X.cols() < 1) throw ArgumentError("dataset needs n >= 1 and p >= 1");
  if (static_cast<Index>(y.size()) != X.rows()) {
    throw ArgumentError("response length " + std::to_string(y.size()) + " does not match " +
                        std::to_string(X.rows()) + " design rows");
  }
  if (!X.allFinite()) throw ArgumentError("design matrix contains non-finite entries");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0) throw ArgumentError("negative count at row " + std::to_string(i));
  }
  if (!feature_names.empty() && static_cast<Index>(feature_names.size()) != X.cols()) {
    throw ArgumentError("feature_names must have one entry per column");
  }
}

Coefficients Coefficients::zeros(Index p) {
  Coefficients c;
  c.theta1 = Vector::Zero(p);
  c.theta2 = Vector::Zero(p);
  return c;
}

Vector Coefficients::stacked() const {
  Vector out(theta1.size() + theta2.size());
  out << theta1, theta2;
  return out;
}

Index Coefficients::support_size() const {
  return (theta1.array() != 0.0).count() + (theta2.array() != 0.0).count();
}

void Coefficients::validate() const {
  if (theta1.size() != theta2.size()) throw ArgumentError("coefficient blocks differ in length");
  if (!theta1.allFinite() || !theta2.allFinite() || !std::isfinite(intercept1) ||
      !std::isfinite(intercept2)) {
    throw ArgumentError("coefficients must be finite");
  }
}

std::vector<LinkValues> linear_predictors(const Dataset& data, const Coefficients& theta,
                                          const ClampBox& clamp) {
  check_dims(data, theta);
  const Vector s1 = predictor(data.X, theta.theta1, theta.intercept1, 1.0);
  const Vector s2 = predictor(data.X, theta.theta2, theta.intercept2, 1.0);
  std::vector<LinkValues> out(static_cast<std::size_t>(data.n()));
  for (Index i = 0; i < data.n(); ++i) {
    auto& lv = out[static_cast<std::size_t>(i)];
    lv.s1 = std::clamp(s1[i], clamp.lower, clamp.upper);
    lv.s2 = std::clamp(s2[i], clamp.lower, clamp.upper);
    lv.mu = std::exp(lv.s1);
    lv.k = std::exp(lv.s2);
  }
  return out;
}

double nb_log_pmf(std::int64_t y, double mu, double k) {
  if (y < 0) throw ArgumentError("count must be non-negative");
  if (!(std::isfinite(mu) && mu > 0.0) || !(std::isfinite(k) && k > 0.0)) {
    throw ArgumentError("mu and k must be finite and positive");
  }
  // k log(k / (k + mu)) = -k log1p(mu / k) keeps the Poisson limit accurate.
  const double yd = static_cast<double>(y);
  return special::log_gamma_ratio(y, k) - special::log_factorial(y) + yd * (std::log(mu) - std::log(k + mu)) -
         k * std::log1p(mu / k);
}

double nb_log_pmf(double y, double mu, double k) {
  if (!std::isfinite(y) || y < 0.0 || std::floor(y) != y) {
    throw ArgumentError("count must be a non-negative integer");
  }
  return nb_log_pmf(static_cast<std::int64_t>(y), mu, k);
}

double poisson_log_pmf(std::int64_t y, double mu) {
  if (y < 0) throw ArgumentError("count must be non-negative");
  if (!(std::isfinite(mu) && mu > 0.0)) throw ArgumentError("mu must be finite and positive");
  return static_cast<double>(y) * std::log(mu) - mu - special::log_factorial(y);
}

Evaluation evaluate(const Dataset& data, const Coefficients& theta, const EvalOptions& opts,
                    bool with_gradient) {
  check_dims(data, theta);
  const Index n = data.n();
  const Vector s1_raw = predictor(data.X, theta.theta1, theta.intercept1, 1.0);
  const Vector s2_raw = predictor(data.X, theta.theta2, theta.intercept2, opts.dispersion_scale);

  Vector w1;
  Vector w2;
  if (with_gradient) {
    w1.resize(n);
    w2.resize(n);
  }

  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const std::int64_t y = data.y[static_cast<std::size_t>(i)];
    const double yd = static_cast<double>(y);
    const double s1 = std::clamp(s1_raw[i], opts.clamp.lower, opts.clamp.upper);
    const double s2 = std::clamp(s2_raw[i], opts.clamp.lower, opts.clamp.upper);
    const double mu = std::exp(s1);
    const double k = std::exp(s2);
    const double lse = special::log_add_exp(s1, s2);
    total += -special::log_gamma_ratio(y, k) - yd * s1 + (yd + k) * lse - k * s2;

    if (with_gradient) {
      // k / (mu + k) and 1 / (mu + k) from the log-sum to avoid overflow.
      const double k_share = std::exp(s2 - lse);
      const double inv_total = std::exp(-lse);
      const double resid = (yd - mu) * inv_total;
      const bool free1 = s1_raw[i] >= opts.clamp.lower && s1_raw[i] <= opts.clamp.upper;
      const bool free2 = s2_raw[i] >= opts.clamp.lower && s2_raw[i] <= opts.clamp.upper;
      w1[i] = free1 ? -(yd - mu) * k_share : 0.0;
      w2[i] = free2 ? k * (special::softplus(s1 - s2) - special::digamma_diff(y, k) + resid)
                    : 0.0;
    }
  }

  Evaluation ev;
  const double inv_n = 1.0 / static_cast<double>(n);
  ev.loss = total * inv_n;
  if (!std::isfinite(ev.loss)) throw NumericalError("loss evaluated to a non-finite value");
  if (with_gradient) {
    ev.grad1.noalias() = data.X.transpose() * w1;
    ev.grad1 *= inv_n;
    ev.grad2.noalias() = data.X.transpose() * w2;
    ev.grad2 *= inv_n * opts.dispersion_scale;
    ev.grad_intercept1 = w1.sum() * inv_n;
    ev.grad_intercept2 = w2.sum() * inv_n;
  }
  return ev;
}

double loss(const Dataset& data, const Coefficients& theta, const ClampBox& clamp) {
  return evaluate(data, theta, EvalOptions{clamp, 1.0}, false).loss;
}

Vector grad(const Dataset& data, const Coefficients& theta, const ClampBox& clamp) {
  const Evaluation ev = evaluate(data, theta, EvalOptions{clamp, 1.0}, true);
  Vector out(2 * data.p());
  out << ev.grad1, ev.grad2;
  return out;
}

double log_factorial_mean(const Dataset& data) {
  double acc = 0.0;
  for (const auto y : data.y) acc += special::log_factorial(y);
  return acc / static_cast<double>(data.y.size());
}

}  // namespace hnbr
