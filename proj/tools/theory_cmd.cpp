#include <cmath>
#include <cstdio>
#include <iostream>

#include "commands.hpp"
#include "hnbr/error.hpp"
#include "hnbr/io.hpp"
#include "hnbr/theory.hpp"

namespace hnbr::cli {

using io::Json;
namespace th = hnbr::theory;

void add_theory(CLI::App& app, TheoryArgs& a) {
  app.add_option("--check", a.check, "Which bound to check")
      ->required()
      ->check(CLI::IsMember({"concentration", "lipschitz", "re", "isometry", "kl", "maxresp", "oracle-rate"}));
  app.add_option("--seed", a.seed, "Seed");
  app.add_option("--trials", a.trials, "Monte Carlo trials (0 = check default)")->check(CLI::NonNegativeNumber);
  app.add_option("--n", a.n, "Sample size (0 = check default)")->check(CLI::NonNegativeNumber);
  app.add_option("--p", a.p, "Dimension (0 = check default)")->check(CLI::NonNegativeNumber);
  app.add_option("--reps", a.reps, "Repetitions per n for oracle-rate")->check(CLI::PositiveNumber);
  app.add_option("--inputs", a.inputs, "Simulation reports for oracle-rate (skips re-running)");
  app.add_option("--out", a.out, "Report path (JSON)");
  app.add_flag("--quiet", a.quiet, "Suppress the summary line");
}

namespace {

Matrix gaussian_design(Index n, Index p, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix X(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) X(i, j) = normal(rng);
  }
  return X;
}

struct Outcome {
  Json config;
  Json results;
  Json metrics;
  bool passed = false;
  std::string summary;
};

Outcome check_concentration(const TheoryArgs& a) {
  const Index n = a.n > 0 ? a.n : 50;
  const int trials = a.trials > 0 ? a.trials : 100000;
  const auto params = th::heterogeneous_ensemble(n, a.seed);
  const auto grid = th::default_t_grid(params, 20);
  const auto tc = th::concentration_check(params, grid, trials, a.seed);
  Outcome o;
  o.config = {{"n", n}, {"trials", trials}, {"seed", a.seed}};
  o.results = {{"t", tc.t}, {"empirical", tc.empirical}, {"bound", tc.bound}, {"std_error", tc.std_error}};
  o.metrics = {{"max_excess", tc.max_excess}, {"passed", tc.passed}};
  o.passed = tc.passed;
  o.summary = "max(empirical - bound - 3 SE) = " + io::format_double(tc.max_excess);
  return o;
}

Outcome check_lipschitz(const TheoryArgs& a) {
  const int draws = a.trials > 0 ? a.trials : 100000;
  const Index n = a.n > 0 ? a.n : 50;
  const Index p = a.p > 0 ? a.p : 4;
  th::BoxBounds box;
  box.m_s = -2.0;
  box.M_s = 2.0;
  box.M_y = 50;
  const auto nc = th::nu_bounds_check(box, draws, a.seed);

  const auto inst = th::small_lipschitz_instance(n, p, a.seed);
  const int datasets = 10;
  const int per = std::max(1, (a.trials > 0 ? a.trials : 10000) / datasets);
  const auto lc = th::stochastic_lipschitz_check(inst.X, inst.truth, inst.D_theta, datasets, per, 0.05, a.seed);

  Outcome o;
  o.config = {{"nu_draws", draws}, {"box", {box.m_s, box.M_s, box.M_y}}, {"n", n}, {"p", p},
              {"datasets", datasets}, {"thetas_per_dataset", per}, {"D_theta", inst.D_theta}, {"q0", 0.05},
              {"seed", a.seed}};
  const auto& c = lc.constants;
  o.results = {{"F1", nc.F1}, {"F2", nc.F2}, {"max_abs_nu", nc.max_abs_nu}, {"max_nu_ratio", nc.max_ratio},
               {"constants",
                {{"F1", c.F1}, {"F2", c.F2}, {"A1", c.A1}, {"A2", c.A2}, {"A3", c.A3}, {"A3_prime", c.A3_prime},
                 {"B", c.B}, {"C", c.C}, {"D", c.D}, {"w1", c.w1}, {"w2", c.w2}, {"M_q", c.M_q},
                 {"M_q_prime", c.M_q_prime}}},
               {"sup_ratio", lc.sup_ratio}, {"sqrt_n_M_q", lc.bound}, {"pairs", lc.pairs}};
  o.metrics = {{"f1_violations", nc.f1_violations}, {"f2_violations", nc.f2_violations},
               {"lipschitz_violations", lc.violations}};
  o.passed = nc.f1_violations == 0 && nc.f2_violations == 0 && lc.violations == 0;
  o.metrics["passed"] = o.passed;
  o.summary = "sup|nu| = " + io::format_double(nc.max_abs_nu) + " <= F1 = " + io::format_double(nc.F1) +
              "; sup ratio = " + io::format_double(lc.sup_ratio) + " vs sqrt(n) M_q = " + io::format_double(lc.bound);
  return o;
}

Outcome check_re(const TheoryArgs& a) {
  const Index n = a.n > 0 ? a.n : 30;
  const Index p = a.p > 0 ? a.p : 8;
  const Matrix X = gaussian_design(n, p, a.seed);
  th::ReBudget budget;
  budget.seed = a.seed;
  const std::vector<double> Ks = {0.5, 1.0, 2.0, 4.0};
  const Index smax = std::min<Index>(p, 3);
  Json table = Json::array();
  bool monotone = true;
  std::vector<std::vector<double>> vals(static_cast<std::size_t>(smax));
  for (Index s = 1; s <= smax; ++s) {
    for (const double K : Ks) {
      const double v = th::re_constant(X, s, K, budget);
      vals[static_cast<std::size_t>(s - 1)].push_back(v);
      table.push_back({{"s", s}, {"K", K}, {"kappa_estimate", v}});
    }
  }
  for (std::size_t si = 0; si < vals.size(); ++si) {
    for (std::size_t ki = 0; ki < Ks.size(); ++ki) {
      if (ki > 0 && vals[si][ki] > vals[si][ki - 1]) monotone = false;
      if (si > 0 && vals[si][ki] > vals[si - 1][ki]) monotone = false;
    }
  }
  Matrix Xd = X;
  if (p >= 2) Xd.col(1) = Xd.col(0);
  const double dup = th::re_constant(Xd, 1, 1.0, budget);
  Outcome o;
  o.config = {{"n", n}, {"p", p}, {"seed", a.seed}};
  o.results = {{"estimates", table}, {"duplicated_column_estimate", dup}};
  o.passed = monotone && dup < 0.05;
  o.metrics = {{"monotone", monotone}, {"degeneracy_detected", dup < 0.05}, {"passed", o.passed}};
  o.summary = std::string("monotone = ") + (monotone ? "yes" : "no") +
              ", duplicated-column estimate = " + io::format_double(dup);
  return o;
}

Outcome check_isometry(const TheoryArgs& a) {
  const Index n = a.n > 0 ? a.n : 6;
  const Index p = a.p > 0 ? a.p : 4;
  const Matrix X = gaussian_design(n, p, a.seed);
  std::vector<double> sig;
  for (Index l = 1; l <= p; ++l) sig.push_back(th::restricted_isometry(X, l));
  bool monotone = true;
  for (std::size_t i = 1; i < sig.size(); ++i) monotone = monotone && sig[i] >= sig[i - 1];
  const double col = X.colwise().squaredNorm().maxCoeff();
  Eigen::JacobiSVD<Matrix> svd(X);
  const double spectral = svd.singularValues()(0) * svd.singularValues()(0);
  const bool l1_ok = std::abs(sig.front() - col) <= 1e-10 * std::max(1.0, col);
  const bool lp_ok = std::abs(sig.back() - spectral) <= 1e-10 * std::max(1.0, spectral);
  Outcome o;
  o.config = {{"n", n}, {"p", p}, {"seed", a.seed}};
  o.results = {{"sigma2", sig}, {"max_col_sq_norm", col}, {"spectral_norm_sq", spectral}};
  o.passed = monotone && l1_ok && lp_ok;
  o.metrics = {{"monotone", monotone}, {"l1_matches_columns", l1_ok}, {"lp_matches_spectral", lp_ok},
               {"passed", o.passed}};
  o.summary = "sigma^2_{X,l} for l = 1.." + std::to_string(p) + (o.passed ? " consistent" : " INCONSISTENT");
  return o;
}

Outcome check_kl(const TheoryArgs& a) {
  const std::vector<double> vals = {-1.0, 0.0, 1.0};
  bool nonneg = true, zero_iff = true;
  double min_kl = 1e300;
  Json grid = Json::array();
  for (const double s1 : vals)
    for (const double s2 : vals)
      for (const double c1 : vals)
        for (const double c2 : vals) {
          const auto s = th::link_from(s1, s2);
          const auto c = th::link_from(c1, c2);
          const double kl = th::kl_nb(s, c, th::kl_support(s, c));
          min_kl = std::min(min_kl, kl);
          nonneg = nonneg && kl >= -1e-10;
          const bool same = s1 == c1 && s2 == c2;
          if (same ? std::abs(kl) > 1e-12 : !(kl > 1e-12)) zero_iff = false;
          grid.push_back({{"s", {s1, s2}}, {"c", {c1, c2}}, {"kl", kl}});
        }
  const auto c = th::link_from(0.3, -0.2);
  Json curv = Json::array();
  std::vector<double> ratios;
  for (const double h : {1e-1, 1e-2, 1e-3}) {
    const auto s = th::link_from(0.3 + h * 0.6, -0.2 - h * 0.8);
    const double kl = th::kl_nb(s, c, th::kl_support(s, c));
    ratios.push_back(kl / (h * h));
    curv.push_back({{"h", h}, {"kl_over_h2", ratios.back()}});
  }
  const double rel = std::abs(ratios[1] - ratios[2]) / ratios[2];
  const bool stable = rel <= 0.10 && ratios[2] > 0.0;
  Outcome o;
  o.config = {{"grid", vals}, {"center", {0.3, -0.2}}, {"direction", {0.6, -0.8}}, {"seed", a.seed}};
  o.results = {{"grid", grid}, {"curvature", curv}, {"min_kl", min_kl}};
  o.passed = nonneg && zero_iff && stable;
  o.metrics = {{"nonnegative", nonneg}, {"zero_iff_equal", zero_iff}, {"curvature_relative_change", rel},
               {"passed", o.passed}};
  o.summary = "min KL = " + io::format_double(min_kl) + ", curvature change 1e-2 -> 1e-3 = " + io::format_double(rel);
  return o;
}

Outcome check_maxresp(const TheoryArgs& a) {
  const int trials = a.trials > 0 ? a.trials : 10000;
  std::vector<Index> ns = a.n > 0 ? std::vector<Index>{a.n} : std::vector<Index>{10, 100};
  Json rows = Json::array();
  bool ok = true;
  std::string summary;
  for (const Index n : ns) {
    const auto params = th::heterogeneous_ensemble(n, a.seed);
    const auto mc = th::max_response_check(params, trials, a.seed);
    ok = ok && mc.passed;
    rows.push_back({{"n", n}, {"empirical_mean", mc.empirical_mean}, {"std_error", mc.std_error},
                    {"bound", mc.bound}, {"passed", mc.passed}});
    summary += "n=" + std::to_string(n) + ": E max = " + io::format_double(mc.empirical_mean) +
               " <= " + io::format_double(mc.bound) + "; ";
  }
  Outcome o;
  o.config = {{"trials", trials}, {"seed", a.seed}};
  o.results = {{"rows", rows}};
  o.passed = ok;
  o.metrics = {{"passed", ok}};
  o.summary = summary;
  return o;
}

Outcome check_oracle_rate(const TheoryArgs& a) {
  std::vector<SimulationReport> reports;
  if (!a.inputs.empty()) {
    for (const auto& path : a.inputs) reports.push_back(io::simulation_report_from_json(io::read_json(path)));
  } else {
    const Index p = a.p > 0 ? a.p : 100;
    for (const Index n : {100, 200, 400}) {
      reports.push_back(run_example2(SimulationConfig::example2(n, p, 0.0, a.reps, a.seed)));
    }
  }
  const auto rc = th::oracle_rate_check(reports);
  Outcome o;
  o.config = {{"inputs", a.inputs}, {"reps", a.reps}, {"seed", a.seed}};
  o.results = {{"n", rc.ns}, {"mean_sq_error", rc.mean_sq_errors}, {"slope", rc.slope},
               {"intercept", rc.intercept}};
  o.passed = rc.monotone_decreasing && rc.slope <= -0.5;
  o.metrics = {{"monotone_decreasing", rc.monotone_decreasing}, {"slope_at_most_minus_half", rc.slope <= -0.5},
               {"passed", o.passed}};
  o.summary = "log-log slope = " + io::format_double(rc.slope);
  return o;
}

}  // namespace

int run_theory(const TheoryArgs& a) {
  Outcome o;
  if (a.check == "concentration") {
    o = check_concentration(a);
  } else if (a.check == "lipschitz") {
    o = check_lipschitz(a);
  } else if (a.check == "re") {
    o = check_re(a);
  } else if (a.check == "isometry") {
    o = check_isometry(a);
  } else if (a.check == "kl") {
    o = check_kl(a);
  } else if (a.check == "maxresp") {
    o = check_maxresp(a);
  } else {
    o = check_oracle_rate(a);
  }
  o.config["check"] = a.check;
  io::write_text(a.out, io::dump(io::theory_envelope(o.config, o.results, o.metrics)));
  if (!a.quiet) std::printf("%s: %s [%s]\n", a.check.c_str(), o.summary.c_str(), o.passed ? "ok" : "VIOLATED");
  return o.passed ? kOk : kCheckFailed;
}

}  // namespace hnbr::cli
