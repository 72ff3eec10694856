#pragma once

// Data generators and Monte Carlo experiment runners for the low-dimensional
// (example1) and high-dimensional variable-selection (example2) studies.

#include <cstdint>
#include <string>
#include <vector>

#include "hnbr/model.hpp"
#include "hnbr/rng.hpp"
#include "hnbr/solver.hpp"
#include "hnbr/tuning.hpp"

namespace hnbr {

enum class Scenario { example1, example2 };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

struct SimulationConfig {
  Index n = 400;
  Index p = 3;
  double rho = 0.0;
  Coefficients theta_star;
  int reps = 200;
  std::uint64_t seed = 1;
  Scenario scenario = Scenario::example1;
  int threads = 1;
  PenaltyConfig solver{};
  GridOptions grid{};

  /// theta1 = (1, 2, -1), theta2 = (-1, 0.5, 1), padded with zeros to length p.
  static Coefficients default_truth(Index p);
  static SimulationConfig example1(Index n, double rho, int reps, std::uint64_t seed);
  static SimulationConfig example2(Index n, Index p, double rho, int reps, std::uint64_t seed);

  void validate() const;
};

struct RepRecord {
  int rep = 0;
  double ase1 = 0.0;
  double ase2 = 0.0;
  /// Constant-dispersion baseline (example1 only; NaN otherwise).
  double ase1_const = 0.0;
  std::vector<Index> support1;
  std::vector<Index> support2;
  bool converged = false;
  bool baseline_converged = false;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::string error;
};

struct SimulationSummary {
  double mean_ase1 = 0.0;
  double mean_ase2 = 0.0;
  double mean_ase1_const = 0.0;
  /// Times each coordinate was selected, per block (length p).
  std::vector<int> selected1;
  std::vector<int> selected2;
  /// Average number of selected coordinates whose true value is zero.
  double false_selected1 = 0.0;
  double false_selected2 = 0.0;
  double false_selected_total = 0.0;
  int nonconverged = 0;
  int failed = 0;
};

struct SimulationReport {
  SimulationConfig config;
  std::vector<RepRecord> per_rep;
  SimulationSummary summary;
};

struct EstimateMetrics {
  double ase1 = 0.0;
  double ase2 = 0.0;
  std::vector<bool> selected1;
  std::vector<bool> selected2;
  /// Selected sets coincide with the true supports in both blocks.
  bool support_match = false;
};

/// Rows i.i.d. N(0, Sigma), Sigma_ab = rho^|a-b|, via the AR(1) recursion.
Matrix gen_design(Index n, Index p, double rho, Rng& rng);

/// Gamma-Poisson draw: G ~ Gamma(k, mu/k), Y ~ Poisson(G).
std::int64_t sample_nb(double mu, double k, Rng& rng);

/// Design from gen_design and responses drawn at the true coefficients.
Dataset generate_dataset(Index n, const Coefficients& truth, double rho, Rng& rng);

EstimateMetrics metrics(const Coefficients& estimate, const Coefficients& truth);

SimulationSummary summarize(const std::vector<RepRecord>& per_rep, const Coefficients& truth);

SimulationReport run_example1(const SimulationConfig& cfg);
SimulationReport run_example2(const SimulationConfig& cfg);
SimulationReport run_simulation(const SimulationConfig& cfg);

/// Synthetic stand-in for the doctor-visit panel: standardized covariates named after the
/// survey variables and a heterogeneous NB response.
Dataset make_health_fixture(Index n, std::uint64_t seed);

}  // namespace hnbr
