#include "hnbr/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "hnbr/error.hpp"

namespace hnbr {

std::string to_string(Scenario s) {
  return s == Scenario::example1 ? "example1" : "example2";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "example1") return Scenario::example1;
  if (s == "example2") return Scenario::example2;
  throw ArgumentError("unknown scenario '" + s + "' (expected example1 or example2)");
}

Coefficients SimulationConfig::default_truth(Index p) {
  if (p < 3) throw ArgumentError("the simulation truth needs p >= 3");
  Coefficients c = Coefficients::zeros(p);
  c.theta1.head(3) << 1.0, 2.0, -1.0;
  c.theta2.head(3) << -1.0, 0.5, 1.0;
  return c;
}

SimulationConfig SimulationConfig::example1(Index n, double rho, int reps, std::uint64_t seed) {
  SimulationConfig c;
  c.n = n;
  c.p = 3;
  c.rho = rho;
  c.reps = reps;
  c.seed = seed;
  c.scenario = Scenario::example1;
  c.theta_star = default_truth(3);
  c.solver.extra_starts = 0;
  return c;
}

SimulationConfig SimulationConfig::example2(Index n, Index p, double rho, int reps,
                                            std::uint64_t seed) {
  SimulationConfig c;
  c.n = n;
  c.p = p;
  c.rho = rho;
  c.reps = reps;
  c.seed = seed;
  c.scenario = Scenario::example2;
  c.theta_star = default_truth(p);
  c.solver.extra_starts = 0;
  return c;
}

void SimulationConfig::validate() const {
  if (n < 1 || p < 1) throw ArgumentError("simulation needs n >= 1 and p >= 1");
  if (reps < 1) throw ArgumentError("simulation needs reps >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw ArgumentError("rho must lie in [0, 1)");
  if (theta_star.p() != p) throw ArgumentError("theta_star blocks must have length p");
  theta_star.validate();
  solver.validate();
}

Matrix gen_design(Index n, Index p, double rho, Rng& rng) {
  if (!(rho >= 0.0 && rho < 1.0)) throw ArgumentError("rho must lie in [0, 1)");
  if (n < 1 || p < 1) throw ArgumentError("design needs n >= 1 and p >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double innov = std::sqrt(1.0 - rho * rho);
  Matrix X(n, p);
  for (Index i = 0; i < n; ++i) {
    double prev = normal(rng);
    X(i, 0) = prev;
    for (Index a = 1; a < p; ++a) {
      prev = rho * prev + innov * normal(rng);
      X(i, a) = prev;
    }
  }
  return X;
}

std::int64_t sample_nb(double mu, double k, Rng& rng) {
  if (!(std::isfinite(mu) && mu > 0.0) || !(std::isfinite(k) && k > 0.0)) {
    throw ArgumentError("sample_nb needs finite positive mu and k");
  }
  std::gamma_distribution<double> gamma(k, mu / k);
  const double g = gamma(rng);
  if (!(g > 0.0)) return 0;
  std::poisson_distribution<std::int64_t> poisson(g);
  return poisson(rng);
}

Dataset generate_dataset(Index n, const Coefficients& truth, double rho, Rng& rng) {
  Matrix X = gen_design(n, truth.p(), rho, rng);
  std::vector<std::int64_t> y(static_cast<std::size_t>(n));
  const Vector s1 = X * truth.theta1;
  const Vector s2 = X * truth.theta2;
  const ClampBox box{};
  for (Index i = 0; i < n; ++i) {
    const double mu = std::exp(std::clamp(s1[i] + truth.intercept1, box.lower, box.upper));
    const double k = std::exp(std::clamp(s2[i] + truth.intercept2, box.lower, box.upper));
    y[static_cast<std::size_t>(i)] = sample_nb(mu, k, rng);
  }
  return Dataset(std::move(X), std::move(y));
}

EstimateMetrics metrics(const Coefficients& estimate, const Coefficients& truth) {
  if (estimate.p() != truth.p() || estimate.theta2.size() != truth.theta2.size()) {
    throw ArgumentError("metrics: dimension mismatch");
  }
  EstimateMetrics m;
  m.ase1 = (estimate.theta1 - truth.theta1).squaredNorm();
  m.ase2 = (estimate.theta2 - truth.theta2).squaredNorm();
  const Index p = truth.p();
  m.selected1.resize(static_cast<std::size_t>(p));
  m.selected2.resize(static_cast<std::size_t>(p));
  m.support_match = true;
  for (Index j = 0; j < p; ++j) {
    const auto u = static_cast<std::size_t>(j);
    m.selected1[u] = estimate.theta1[j] != 0.0;
    m.selected2[u] = estimate.theta2[j] != 0.0;
    if (m.selected1[u] != (truth.theta1[j] != 0.0) || m.selected2[u] != (truth.theta2[j] != 0.0)) {
      m.support_match = false;
    }
  }
  return m;
}

SimulationSummary summarize(const std::vector<RepRecord>& per_rep, const Coefficients& truth) {
  const Index p = truth.p();
  SimulationSummary s;
  s.selected1.assign(static_cast<std::size_t>(p), 0);
  s.selected2.assign(static_cast<std::size_t>(p), 0);
  if (per_rep.empty()) return s;
  double a1 = 0.0, a2 = 0.0, a1c = 0.0, f1 = 0.0, f2 = 0.0;
  for (const auto& r : per_rep) {
    if (!r.error.empty()) {
      ++s.failed;
      continue;
    }
    a1 += r.ase1;
    a2 += r.ase2;
    a1c += r.ase1_const;
    for (const Index j : r.support1) {
      ++s.selected1[static_cast<std::size_t>(j)];
      if (truth.theta1[j] == 0.0) f1 += 1.0;
    }
    for (const Index j : r.support2) {
      ++s.selected2[static_cast<std::size_t>(j)];
      if (truth.theta2[j] == 0.0) f2 += 1.0;
    }
    if (!r.converged) ++s.nonconverged;
  }
  // Failed repetitions carry no estimate; averages run over the rest (NaN if none remain).
  const double reps = static_cast<double>(per_rep.size() - static_cast<std::size_t>(s.failed));
  s.mean_ase1 = a1 / reps;
  s.mean_ase2 = a2 / reps;
  s.mean_ase1_const = a1c / reps;
  s.false_selected1 = f1 / reps;
  s.false_selected2 = f2 / reps;
  s.false_selected_total = (f1 + f2) / reps;
  return s;
}

namespace {

RepRecord one_rep_example1(const SimulationConfig& cfg, int rep) {
  RepRecord r;
  r.rep = rep;
  Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(rep));
  const Dataset data = generate_dataset(cfg.n, cfg.theta_star, cfg.rho, rng);

  PenaltyConfig pc = cfg.solver;
  pc.lambda1 = 0.0;
  pc.lambda2 = 0.0;
  const Solution full = fit(data, pc);
  const Solution base = fit_constant_dispersion(data, pc);
  const EstimateMetrics m = metrics(full.theta, cfg.theta_star);
  r.ase1 = m.ase1;
  r.ase2 = m.ase2;
  r.ase1_const = (base.theta.theta1 - cfg.theta_star.theta1).squaredNorm();
  r.support1 = support_of(full.theta.theta1);
  r.support2 = support_of(full.theta.theta2);
  r.converged = full.converged;
  r.baseline_converged = base.converged;
  return r;
}

RepRecord one_rep_example2(const SimulationConfig& cfg, int rep) {
  RepRecord r;
  r.rep = rep;
  Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(rep));
  const Dataset data = generate_dataset(cfg.n, cfg.theta_star, cfg.rho, rng);

  const LambdaGrid grid = default_grid(data.n(), data.p(), data, cfg.grid);
  const FitResult res = grid_search(data, grid, cfg.solver);
  const EstimateMetrics m = metrics(res.best.theta, cfg.theta_star);
  r.ase1 = m.ase1;
  r.ase2 = m.ase2;
  r.ase1_const = std::numeric_limits<double>::quiet_NaN();
  r.support1 = res.selected_support1;
  r.support2 = res.selected_support2;
  r.converged = res.best.converged;
  r.baseline_converged = false;
  r.lambda1 = res.best_pair.lambda1;
  r.lambda2 = res.best_pair.lambda2;
  return r;
}

template <typename RepFn>
std::vector<RepRecord> run_reps(const SimulationConfig& cfg, RepFn fn) {
  std::vector<RepRecord> out(static_cast<std::size_t>(cfg.reps));
  auto guarded = [&](int rep) {
    try {
      out[static_cast<std::size_t>(rep)] = fn(cfg, rep);
    } catch (const std::exception& e) {
      RepRecord r;
      r.rep = rep;
      r.ase1 = r.ase2 = r.ase1_const = std::numeric_limits<double>::quiet_NaN();
      r.error = e.what();
      out[static_cast<std::size_t>(rep)] = std::move(r);
    }
  };
  const int workers = std::max(1, std::min(cfg.threads, cfg.reps));
  if (workers == 1) {
    for (int rep = 0; rep < cfg.reps; ++rep) guarded(rep);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int rep = w; rep < cfg.reps; rep += workers) guarded(rep);
      });
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

}  // namespace

SimulationReport run_example1(const SimulationConfig& cfg) {
  cfg.validate();
  if (cfg.scenario != Scenario::example1) throw ArgumentError("run_example1 needs scenario example1");
  SimulationReport rep;
  rep.config = cfg;
  rep.per_rep = run_reps(cfg, one_rep_example1);
  rep.summary = summarize(rep.per_rep, cfg.theta_star);
  return rep;
}

SimulationReport run_example2(const SimulationConfig& cfg) {
  cfg.validate();
  if (cfg.scenario != Scenario::example2) throw ArgumentError("run_example2 needs scenario example2");
  SimulationReport rep;
  rep.config = cfg;
  rep.per_rep = run_reps(cfg, one_rep_example2);
  rep.summary = summarize(rep.per_rep, cfg.theta_star);
  return rep;
}

SimulationReport run_simulation(const SimulationConfig& cfg) {
  return cfg.scenario == Scenario::example1 ? run_example1(cfg) : run_example2(cfg);
}

Dataset make_health_fixture(Index n, std::uint64_t seed) {
  static const std::vector<std::string> kNames = {"Age",     "Hsat",  "Handper", "Educ",
                                                  "Female",  "Married", "Hhninc", "Working",
                                                  "Hhkids", "Public"};
  const Index p = static_cast<Index>(kNames.size());
  Coefficients truth = Coefficients::zeros(p);
  truth.theta1.head(4) << 0.3, -0.5, 0.35, -0.2;
  truth.theta2.segment(1, 2) << 0.6, -0.5;
  truth.intercept1 = 0.8;
  truth.intercept2 = 0.2;
  Rng rng = make_stream(seed, 0);
  Dataset d = generate_dataset(n, truth, 0.2, rng);
  d.feature_names = kNames;
  return d;
}

}  // namespace hnbr
