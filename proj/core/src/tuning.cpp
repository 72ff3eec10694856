#include "hnbr/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "hnbr/error.hpp"

namespace hnbr {

LambdaGrid LambdaGrid::from_pairs(std::vector<LambdaPair> pairs) {
  std::stable_sort(pairs.begin(), pairs.end(), [](const LambdaPair& a, const LambdaPair& b) {
    if (a.max() != b.max()) return a.max() > b.max();
    if (a.lambda1 != b.lambda1) return a.lambda1 > b.lambda1;
    return a.lambda2 > b.lambda2;
  });
  LambdaGrid grid{std::move(pairs)};
  grid.validate();
  return grid;
}

void LambdaGrid::validate() const {
  if (pairs.empty()) throw ArgumentError("lambda grid is empty");
  for (const auto& pr : pairs) {
    if (!(std::isfinite(pr.lambda1) && pr.lambda1 > 0.0 && std::isfinite(pr.lambda2) &&
          pr.lambda2 > 0.0)) {
      throw ArgumentError("lambda grid entries must be finite and positive");
    }
  }
}

std::vector<Index> support_of(const Vector& block) {
  std::vector<Index> out;
  for (Index j = 0; j < block.size(); ++j) {
    if (block[j] != 0.0) out.push_back(j);
  }
  return out;
}

double bic(const Dataset& data, const Coefficients& theta, const ClampBox& clamp) {
  const double loglik = -loss(data, theta, clamp);
  const double n = static_cast<double>(data.n());
  return -2.0 * loglik + std::log(n) / n * static_cast<double>(theta.support_size());
}

std::pair<double, double> lambda_max(const Dataset& data, const ClampBox& clamp) {
  const Vector g = grad(data, Coefficients::zeros(data.p()), clamp);
  const Index p = data.p();
  return {g.head(p).lpNorm<Eigen::Infinity>(), g.tail(p).lpNorm<Eigen::Infinity>()};
}

LambdaGrid default_grid(Index n, Index p, const Dataset& data, const GridOptions& opts) {
  if (n < 1 || p < 1) throw ArgumentError("default_grid needs n >= 1 and p >= 1");
  if (n != data.n() || p != data.p()) throw ArgumentError("default_grid: n, p disagree with data");
  if (opts.ladder_size < 1 || !(opts.min_ratio > 0.0 && opts.min_ratio <= 1.0) ||
      !(opts.ratio_lower > 0.0 && opts.ratio_lower <= opts.ratio_upper)) {
    throw ArgumentError("invalid grid options");
  }
  if (data.X.isZero(0.0)) throw ArgumentError("design matrix is all zero; lambda_max undefined");
  const auto [max1, max2] = lambda_max(data);
  if (!(max1 > 0.0) || !(max2 > 0.0)) {
    throw ArgumentError("degenerate dataset: zero gradient at theta = 0 in one block");
  }

  auto ladder = [&](double top) {
    std::vector<double> out(static_cast<std::size_t>(opts.ladder_size));
    for (int i = 0; i < opts.ladder_size; ++i) {
      const double frac = opts.ladder_size == 1 ? 0.0 : static_cast<double>(i) / (opts.ladder_size - 1);
      out[static_cast<std::size_t>(i)] = top * std::pow(opts.min_ratio, frac);
    }
    return out;
  };
  const auto l1 = ladder(max1);
  const auto l2 = ladder(max2);

  std::vector<LambdaPair> pairs;
  for (const double a : l1) {
    for (const double b : l2) {
      const double r = a / b;
      if (r >= opts.ratio_lower && r <= opts.ratio_upper) pairs.push_back({a, b});
    }
  }
  if (pairs.empty()) throw ArgumentError("ratio filter removed every grid pair");
  return LambdaGrid::from_pairs(std::move(pairs));
}

FitResult grid_search(const Dataset& data, const LambdaGrid& grid, const PenaltyConfig& cfg,
                      const SearchOptions& opts) {
  data.validate();
  grid.validate();
  cfg.validate();

  const std::size_t m = grid.pairs.size();
  std::vector<Solution> sols(m);
  std::vector<TraceRow> trace(m);

  auto solve_one = [&](std::size_t i, const Coefficients& start) {
    PenaltyConfig c = cfg;
    c.lambda1 = grid.pairs[i].lambda1;
    c.lambda2 = grid.pairs[i].lambda2;
    c.extra_starts = 0;
    c.record_history = false;
    sols[i] = fit_from(data, c, start);
    const double n = static_cast<double>(data.n());
    const double loglik = -loss(data, sols[i].theta, cfg.clamp) + opts.loglik_offset;
    trace[i] = TraceRow{c.lambda1, c.lambda2,
                        -2.0 * loglik + std::log(n) / n *
                                            static_cast<double>(sols[i].theta.support_size()),
                        sols[i].theta.support_size(), sols[i].converged};
  };

  if (opts.warm_start) {
    Coefficients start = Coefficients::zeros(data.p());
    for (std::size_t i = 0; i < m; ++i) {
      solve_one(i, start);
      start = sols[i].theta;
    }
  } else {
    const int workers = std::max(1, std::min<int>(opts.threads, static_cast<int>(m)));
    const Coefficients zero = Coefficients::zeros(data.p());
    if (workers == 1) {
      for (std::size_t i = 0; i < m; ++i) solve_one(i, zero);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t i = static_cast<std::size_t>(w); i < m; i += static_cast<std::size_t>(workers)) {
            solve_one(i, zero);
          }
        });
      }
      for (auto& t : pool) t.join();
    }
  }

  // Grid order is decreasing in max(lambda1, lambda2), so the first minimum is the sparser tie.
  std::size_t best = 0;
  for (std::size_t i = 1; i < m; ++i) {
    if (trace[i].bic < trace[best].bic) best = i;
  }

  FitResult res;
  res.best = sols[best];
  res.best_pair = grid.pairs[best];
  res.trace = std::move(trace);
  if (cfg.extra_starts > 0) {
    PenaltyConfig c = cfg;
    c.lambda1 = res.best_pair.lambda1;
    c.lambda2 = res.best_pair.lambda2;
    c.record_history = false;
    const Solution diag = fit_from(data, c, res.best.theta);
    res.best.multistart_gap = diag.multistart_gap;
    res.best.multistart_objective_gap = diag.multistart_objective_gap;
  }
  res.selected_support1 = support_of(res.best.theta.theta1);
  res.selected_support2 = support_of(res.best.theta.theta2);
  return res;
}

}  // namespace hnbr
