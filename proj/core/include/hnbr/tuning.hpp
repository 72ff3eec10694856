#pragma once

// BIC model selection over a (lambda1, lambda2) grid.

#include <utility>
#include <vector>

#include "hnbr/solver.hpp"

namespace hnbr {

struct LambdaPair {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double max() const { return lambda1 > lambda2 ? lambda1 : lambda2; }
};

/// Candidate penalty levels, ordered by decreasing max(lambda1, lambda2).
struct LambdaGrid {
  std::vector<LambdaPair> pairs;

  /// Sorts into warm-start order and validates.
  static LambdaGrid from_pairs(std::vector<LambdaPair> pairs);
  void validate() const;
};

struct GridOptions {
  /// Points per block on the log-spaced ladder.
  int ladder_size = 20;
  /// Smallest lambda as a fraction of lambda_max.
  double min_ratio = 0.01;
  /// Allowed range of lambda1 / lambda2.
  double ratio_lower = 0.1;
  double ratio_upper = 10.0;
};

struct TraceRow {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double bic = 0.0;
  Index support_size = 0;
  bool converged = false;
};

struct FitResult {
  Solution best;
  LambdaPair best_pair;
  std::vector<TraceRow> trace;
  std::vector<Index> selected_support1;
  std::vector<Index> selected_support2;
};

struct SearchOptions {
  bool warm_start = true;
  /// Worker threads; only used when warm_start is false.
  int threads = 1;
  /// Added to every log-likelihood before computing BIC (argmin-invariance checks).
  double loglik_offset = 0.0;
};

/// -2 * l(theta) + (log n / n) * (#nonzero slopes), l = -loss.
double bic(const Dataset& data, const Coefficients& theta, const ClampBox& clamp = {});

/// Per-block lambda_max = max |grad at theta = 0|.
std::pair<double, double> lambda_max(const Dataset& data, const ClampBox& clamp = {});

LambdaGrid default_grid(Index n, Index p, const Dataset& data, const GridOptions& opts = {});

FitResult grid_search(const Dataset& data, const LambdaGrid& grid, const PenaltyConfig& cfg,
                      const SearchOptions& opts = {});

std::vector<Index> support_of(const Vector& block);

}  // namespace hnbr
