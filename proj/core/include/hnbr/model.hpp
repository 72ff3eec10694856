#pragma once

// Heterogeneous negative binomial model: mu(x) = exp(theta1' x), k(x) = exp(theta2' x).

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hnbr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Design matrix paired with count responses.
struct Dataset {
  Matrix X;
  std::vector<std::int64_t> y;
  std::vector<std::string> feature_names;

  Dataset() = default;
  /// Validates on construction; throws ArgumentError.
  Dataset(Matrix X, std::vector<std::int64_t> y, std::vector<std::string> feature_names = {});

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }

  void validate() const;
};

/// Mean block theta1 and dispersion block theta2, plus optional unpenalized intercepts.
///
/// The intercepts are zero unless a fit enables them (intercept option or the
/// constant-dispersion baseline, which carries its log-dispersion in intercept2).
struct Coefficients {
  Vector theta1;
  Vector theta2;
  double intercept1 = 0.0;
  double intercept2 = 0.0;

  static Coefficients zeros(Index p);

  Index p() const { return theta1.size(); }
  /// (theta1, theta2) stacked, length 2p.
  Vector stacked() const;
  /// Number of exactly-nonzero slope coefficients across both blocks.
  Index support_size() const;
  void validate() const;
};

/// Box applied to both linear predictors before exponentiation.
struct ClampBox {
  double lower = -30.0;
  double upper = 30.0;
};

struct LinkValues {
  double s1 = 0.0;
  double s2 = 0.0;
  double mu = 1.0;
  double k = 1.0;
};

/// Options shared by the loss/gradient evaluators.
struct EvalOptions {
  ClampBox clamp{};
  /// Multiplies the dispersion-block covariates (the rescaled problem uses lambda1/lambda2).
  double dispersion_scale = 1.0;
};

/// Loss together with its gradient, split by block.
struct Evaluation {
  double loss = 0.0;
  Vector grad1;
  Vector grad2;
  double grad_intercept1 = 0.0;
  double grad_intercept2 = 0.0;
};

std::vector<LinkValues> linear_predictors(const Dataset& data, const Coefficients& theta,
                                          const ClampBox& clamp = {});

/// log f(y; k, mu) of the NB(mean mu, dispersion k) distribution, log y! included.
double nb_log_pmf(std::int64_t y, double mu, double k);

/// Overload accepting a real-valued count; rejects non-integral values.
double nb_log_pmf(double y, double mu, double k);

double poisson_log_pmf(std::int64_t y, double mu);

/// Average negative log-likelihood with the theta-independent log y! term dropped.
double loss(const Dataset& data, const Coefficients& theta, const ClampBox& clamp = {});

/// Gradient of `loss` with respect to (theta1, theta2), length 2p.
Vector grad(const Dataset& data, const Coefficients& theta, const ClampBox& clamp = {});

/// Single pass computing the loss and (optionally) its gradient.
Evaluation evaluate(const Dataset& data, const Coefficients& theta, const EvalOptions& opts,
                    bool with_gradient = true);

/// (1/n) sum log y_i!, the constant separating `loss` from the full negative log-likelihood.
double log_factorial_mean(const Dataset& data);

}  // namespace hnbr
