#pragma once

// Double l1-penalized estimation:
//   minimize loss(theta) + lambda1 * |theta1|_1 + lambda2 * |theta2|_1
// by proximal gradient with backtracking.

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "hnbr/model.hpp"

namespace hnbr {

struct PenaltyConfig {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  /// Relative objective change below which the iteration may stop.
  double tol = 1e-8;
  /// Maximum subgradient-condition violation accepted as converged.
  double tol_kkt = 1e-4;
  int max_iter = 10000;
  double step_init = 1.0;
  double backtrack_factor = 0.5;
  /// Adds an unpenalized intercept to each block.
  bool unpenalized_intercepts = false;
  /// z-scores the columns before fitting and maps the coefficients back.
  bool standardize = false;
  /// Additional randomly initialized solves used only for disagreement diagnostics.
  int extra_starts = 1;
  std::uint64_t seed = 0;
  ClampBox clamp{};
  /// Keep the objective value after every accepted step in Solution::history.
  bool record_history = false;

  /// lambda = max(lambda1, lambda2).
  double lambda() const { return lambda1 > lambda2 ? lambda1 : lambda2; }
  /// (lambda1 / lambda, lambda2 / lambda); (0, 0) when both are zero.
  std::pair<double, double> weights() const;
  void validate() const;
};

struct Solution {
  Coefficients theta;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  std::vector<double> history;
  /// l-infinity distance to the best extra-start solution (NaN when none were run).
  double multistart_gap = std::numeric_limits<double>::quiet_NaN();
  /// objective(extra start) - objective(this); negative means an extra start did better.
  double multistart_objective_gap = std::numeric_limits<double>::quiet_NaN();
};

/// sign(v) * max(|v| - t, 0).
double soft_threshold(double v, double t);

/// lambda1 * |theta1|_1 + lambda2 * |theta2|_1.
double penalty(const Coefficients& theta, const PenaltyConfig& cfg);

/// loss + penalty.
double objective(const Dataset& data, const Coefficients& theta, const PenaltyConfig& cfg);

Solution fit(const Dataset& data, const PenaltyConfig& cfg);

/// Same as `fit`, starting from `start` instead of zero.
Solution fit_from(const Dataset& data, const PenaltyConfig& cfg, const Coefficients& start);

/// Solves the single-penalty reformulation: dispersion covariates scaled by lambda1/lambda2,
/// penalty lambda1 on (theta1, theta3), theta3 = (lambda2/lambda1) theta2.
Solution fit_rescaled(const Dataset& data, const PenaltyConfig& cfg);

/// Maximum violation of the subgradient optimality conditions at theta.
double kkt_residual(const Dataset& data, const Coefficients& theta, const PenaltyConfig& cfg);

/// Restricted model with dispersion constant across rows: theta2 = 0 and a free,
/// unpenalized log-dispersion stored in Coefficients::intercept2.
Solution fit_constant_dispersion(const Dataset& data, const PenaltyConfig& cfg);

}  // namespace hnbr
