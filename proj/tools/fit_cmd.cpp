#include <cstdio>
#include <iostream>

#include "commands.hpp"
#include "hnbr/error.hpp"
#include "hnbr/io.hpp"
#include "hnbr/simulate.hpp"
#include "hnbr/solver.hpp"
#include "hnbr/tuning.hpp"

namespace hnbr::cli {

void add_fit(CLI::App& app, FitArgs& a) {
  app.add_option("--data", a.data, "CSV file")->required()->check(CLI::ExistingFile);
  app.add_option("--response", a.response, "Response column (name, or 0-based index)");
  app.add_option("--features", a.features, "Feature columns (default: all others)")->delimiter(',');
  app.add_option("--delimiter", a.delimiter, "Field delimiter");
  app.add_flag("--no-header", a.no_header, "The first row holds data");
  auto* l1 = app.add_option("--lambda1", a.lambda1, "Mean-block penalty")->check(CLI::NonNegativeNumber);
  auto* l2 = app.add_option("--lambda2", a.lambda2, "Dispersion-block penalty")->check(CLI::NonNegativeNumber);
  auto* grid = app.add_flag("--auto-grid", a.auto_grid, "Choose (lambda1, lambda2) by BIC over a grid");
  l1->needs(l2);
  l2->needs(l1);
  grid->excludes(l1)->excludes(l2);
  app.add_option("--tol", a.tol, "Relative objective tolerance")->check(CLI::PositiveNumber);
  app.add_option("--max-iter", a.max_iter, "Iteration budget per solve")->check(CLI::PositiveNumber);
  app.add_option("--seed", a.seed, "Seed for the extra random starts");
  app.add_option("--out", a.out, "Artifact path (JSON)");
  app.add_flag("--intercept", a.intercept, "Add an unpenalized intercept to each block");
  app.add_flag("--standardize", a.standardize, "Standardize columns before fitting");
  app.add_option("--threads", a.threads, "Workers for grid points (with --no-warm-start)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--no-warm-start", a.no_warm_start, "Solve grid points independently");
  app.add_option("--extra-starts", a.extra_starts, "Random restarts for the disagreement diagnostic")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--ladder", a.ladder, "Grid points per block")->check(CLI::PositiveNumber);
  app.add_option("--min-ratio", a.min_ratio, "Smallest lambda as a fraction of lambda_max")
      ->check(CLI::Range(1e-12, 1.0));
  app.add_option("--timestamp", a.timestamp, "Timestamp string recorded in the artifact");
  app.add_flag("--quiet", a.quiet, "Suppress the coefficient table");
}

namespace {

void print_table(const io::FitArtifact& art, const Dataset& data) {
  const Coefficients& c = art.result.best.theta;
  std::printf("%-16s %14s %14s\n", "variable", "theta1 (mean)", "theta2 (disp)");
  if (art.config.unpenalized_intercepts) {
    std::printf("%-16s %14.6f %14.6f\n", "(intercept)", c.intercept1, c.intercept2);
  }
  for (Index j = 0; j < c.p(); ++j) {
    std::printf("%-16s %14.6f %14.6f\n", data.feature_names[static_cast<std::size_t>(j)].c_str(),
                c.theta1[j], c.theta2[j]);
  }
  std::printf("lambda = (%.6g, %.6g)  objective = %.10g  iterations = %d  converged = %s\n",
              art.result.best_pair.lambda1, art.result.best_pair.lambda2, art.result.best.objective,
              art.result.best.iterations, art.result.best.converged ? "yes" : "no");
  std::printf("FE (signed) = %.6g  MAE = %.6g", art.metrics.fe_signed, art.metrics.mae);
  if (art.baseline_metrics) {
    std::printf("  | NBR FE (signed) = %.6g  NBR MAE = %.6g", art.baseline_metrics->fe_signed,
                art.baseline_metrics->mae);
  }
  std::printf("\n");
}

}  // namespace

int run_fit(const FitArgs& a) {
  if (!a.auto_grid && (a.lambda1 < 0.0 || a.lambda2 < 0.0)) {
    throw ArgumentError("give --lambda1 and --lambda2, or --auto-grid");
  }
  if (a.delimiter.size() != 1) throw ArgumentError("--delimiter must be a single character");

  io::CsvSchema schema;
  schema.response_column = a.response;
  schema.feature_columns = a.features;
  schema.has_header = !a.no_header;
  schema.delimiter = a.delimiter[0];
  const Dataset data = io::read_csv(a.data, schema);

  PenaltyConfig cfg;
  cfg.tol = a.tol;
  cfg.max_iter = a.max_iter;
  cfg.seed = a.seed;
  cfg.unpenalized_intercepts = a.intercept;
  cfg.standardize = a.standardize;
  cfg.extra_starts = a.extra_starts;

  io::FitArtifact art;
  art.timestamp = a.timestamp;
  art.data = io::fingerprint(data);
  art.feature_names = data.feature_names;
  art.auto_grid = a.auto_grid;
  art.grid.ladder_size = a.ladder;
  art.grid.min_ratio = a.min_ratio;

  if (a.auto_grid) {
    const LambdaGrid grid = default_grid(data.n(), data.p(), data, art.grid);
    SearchOptions so;
    so.warm_start = !a.no_warm_start;
    so.threads = a.threads;
    art.result = grid_search(data, grid, cfg, so);
    cfg.lambda1 = art.result.best_pair.lambda1;
    cfg.lambda2 = art.result.best_pair.lambda2;
  } else {
    cfg.lambda1 = a.lambda1;
    cfg.lambda2 = a.lambda2;
    art.result.best = fit(data, cfg);
    art.result.best_pair = {a.lambda1, a.lambda2};
    art.result.selected_support1 = support_of(art.result.best.theta.theta1);
    art.result.selected_support2 = support_of(art.result.best.theta.theta2);
    art.result.trace.push_back(TraceRow{a.lambda1, a.lambda2, bic(data, art.result.best.theta, cfg.clamp),
                                        art.result.best.theta.support_size(), art.result.best.converged});
  }
  art.config = cfg;
  art.metrics = io::fit_metrics(data, art.result.best.theta, cfg.clamp);

  PenaltyConfig base_cfg = cfg;
  base_cfg.extra_starts = 0;
  const Solution base = fit_constant_dispersion(data, base_cfg);
  art.baseline_metrics = io::fit_metrics(data, base.theta, cfg.clamp);

  io::write_text(a.out, io::dump(io::to_json(art)));
  if (!a.quiet) print_table(art, data);
  if (!art.result.best.converged) {
    std::cerr << "warning: solver did not converge within " << a.max_iter << " iterations\n";
    return kNotConverged;
  }
  return kOk;
}

void add_fixture(CLI::App& app, FixtureArgs& a) {
  app.add_option("--kind", a.kind, "health | example1 | example2")
      ->check(CLI::IsMember({"health", "example1", "example2"}));
  app.add_option("--n", a.n, "Rows")->check(CLI::PositiveNumber);
  app.add_option("--p", a.p, "Columns (example2 only)")->check(CLI::PositiveNumber);
  app.add_option("--seed", a.seed, "Generator seed");
  app.add_option("--out", a.out, "CSV path");
}

int run_fixture(const FixtureArgs& a) {
  Dataset d;
  if (a.kind == "health") {
    d = make_health_fixture(a.n, a.seed);
  } else {
    const Index p = a.kind == "example1" ? 3 : a.p;
    const SimulationConfig cfg = a.kind == "example1" ? SimulationConfig::example1(a.n, 0.0, 1, a.seed)
                                                      : SimulationConfig::example2(a.n, p, 0.0, 1, a.seed);
    // Same stream as repetition 0 of the matching simulation.
    Rng rng = make_stream(cfg.seed, 0);
    d = generate_dataset(cfg.n, cfg.theta_star, cfg.rho, rng);
  }
  io::write_csv(a.out, d);
  return kOk;
}

}  // namespace hnbr::cli
