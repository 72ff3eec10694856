#pragma once

// Numeric evaluation of the concentration, stochastic-Lipschitz, restricted-eigenvalue
// and KL-curvature quantities behind the oracle inequality, together with Monte Carlo
// and brute-force checks of each.

#include <array>
#include <cstdint>
#include <vector>

#include "hnbr/model.hpp"
#include "hnbr/rng.hpp"
#include "hnbr/simulate.hpp"

namespace hnbr::theory {

/// Bounded value space for s = (x'theta1, x'theta2) and the responses.
struct BoxBounds {
  double m_s = -2.0;
  double M_s = 2.0;
  std::int64_t M_y = 50;
  double M_x = 1.0;
  double D_theta = 1.0;

  void validate() const;
};

struct ConcentrationParams {
  std::vector<double> mus;
  std::vector<double> ks;
  std::vector<double> weights;

  void validate() const;
};

// ---- sub-exponential constants -------------------------------------------------------

/// ||Y||_psi1 = [log((1 - (1-q) / 2^(1/k)) / q)]^-1, q = mu / (k + mu). +inf when the
/// log argument rounds to 1.
double subexp_norm(double mu, double k);

/// subexp_norm(mu, k) + mu / log 2.
double a_const(double mu, double k);

/// 2 exp{-(1/4) min(t^2 / (2 sum w_i^2 a_i^2), t / max |w_i| a_i)} before clipping.
double concentration_bound_raw(const ConcentrationParams& params, double t);

/// concentration_bound_raw clipped to [0, 1].
double concentration_bound(const ConcentrationParams& params, double t);

/// 2 max_i[a_i - mu_i / log 2] [log(2n) + sqrt(2 log 2n)] + max_i mu_i, with n = params size.
double max_response_bound(const ConcentrationParams& params, Index n);

// ---- loss-derivative bounds --------------------------------------------------------

/// Non-linear part of the dispersion-block derivative of the loss in s.
double nu(double s1, double s2, std::int64_t y);

/// sup |nu| over the box.
double bound_f1(const BoxBounds& b);
/// Lipschitz constant of nu (l-infinity in s) over the box.
double bound_f2(const BoxBounds& b);

/// Design and response-scale summaries used by the Lipschitz constants.
struct DesignStats {
  Index n = 0;
  Index p = 0;
  double max_col_sq = 0.0;      // max_k sum_i X_ik^2
  double max_col_quartic = 0.0; // max_k sum_i X_ik^4
  double sum_a4 = 0.0;          // sum_i a(mu_i, k_i)^4
  double max_a = 0.0;           // max_i a(mu_i, k_i)
  double max_a_excess = 0.0;    // max_i [a(mu_i, k_i) - mu_i / log 2]
};

DesignStats design_stats(const Matrix& X, const std::vector<double>& mus,
                         const std::vector<double>& ks);

/// Probability budget split: q1..q3 for the random-M_y bound, q1..q4 for the nonrandom one.
struct ProbabilitySplit {
  std::array<double, 3> random_bound{};
  std::array<double, 4> nonrandom_bound{};

  static ProbabilitySplit equal(double q0);
  void validate() const;
};

struct LipschitzConstants {
  double F1 = 0.0;
  double F2 = 0.0;
  double A1 = 0.0;
  double A2 = 0.0;
  double A3 = 0.0;
  double A3_prime = 0.0;
  double B = 0.0;
  double C = 0.0;
  double D = 0.0;
  double w1 = 0.0;
  double w2 = 0.0;
  /// sqrt(n) * M_q and sqrt(n) * M_q', the bounds on Lip(gamma; theta*).
  double lip_bound = 0.0;
  double lip_bound_prime = 0.0;
  double M_q = 0.0;
  double M_q_prime = 0.0;
};

/// `log_concavity_gamma` is the strong midpoint log-convexity constant entering A3'.
LipschitzConstants lipschitz_constants(const BoxBounds& bounds, const DesignStats& stats,
                                       const ProbabilitySplit& q, double log_concavity_gamma = 1.0);

// ---- design conditions ---------------------------------------------------------------

struct ReBudget {
  int random_directions = 2000;
  int random_supports = 500;
  int max_enumerated_support = 4;
  std::uint64_t seed = 7;
};

/// Search-based upper estimate of the restricted eigenvalue kappa(s, K). The candidate
/// pool depends only on (X, budget), so estimates are monotone in s and K.
double re_constant(const Matrix& X, Index s, double K, const ReBudget& budget = {});

/// sigma^2_{X,l}: max over |S| <= l of the top eigenvalue of X_S' X_S. Exact by enumeration;
/// throws BudgetExceeded when C(p, l) exceeds `max_subsets`.
double restricted_isometry(const Matrix& X, Index l, double max_subsets = 1e5);

// ---- KL curvature --------------------------------------------------------------------

/// sum_{y <= y_max} f(y|c) [log f(y|c) - log f(y|s)]; both tails beyond y_max must be < 1e-12.
double kl_nb(const LinkValues& s, const LinkValues& c, std::int64_t y_max);

/// Smallest y_max for which both pmf tails are below `tail`.
std::int64_t kl_support(const LinkValues& s, const LinkValues& c, double tail = 1e-13);

LinkValues link_from(double s1, double s2);

// ---- oracle rate -------------------------------------------------------------------

struct RateCheck {
  std::vector<double> ns;
  std::vector<double> mean_sq_errors;
  double slope = 0.0;
  double intercept = 0.0;
  bool monotone_decreasing = false;
};

/// Regresses log mean ||theta_hat - theta*||_2^2 on log n.
RateCheck oracle_rate_check(const std::vector<double>& ns, const std::vector<double>& errors);
RateCheck oracle_rate_check(const std::vector<SimulationReport>& reports);

/// Right-hand side of the l2 oracle inequality, for reporting.
double oracle_l2_bound(double p1, double M_q_prime, double K, double kappa, double n,
                       double C_gamma, double sigma2);

// ---- Monte Carlo checks ---------------------------------------------------------------

struct TailCheck {
  std::vector<double> t;
  std::vector<double> empirical;
  std::vector<double> bound;
  std::vector<double> std_error;
  /// max_t (empirical - bound - 3 SE); <= 0 means no violation.
  double max_excess = 0.0;
  bool passed = false;
};

TailCheck concentration_check(const ConcentrationParams& params, const std::vector<double>& t_grid,
                              int trials, std::uint64_t seed);

struct NuCheck {
  double F1 = 0.0;
  double F2 = 0.0;
  double max_abs_nu = 0.0;
  double max_ratio = 0.0;
  int f1_violations = 0;
  int f2_violations = 0;
  int draws = 0;
};

NuCheck nu_bounds_check(const BoxBounds& box, int draws, std::uint64_t seed);

struct LipschitzCheck {
  double sup_ratio = 0.0;
  double bound = 0.0;
  int violations = 0;
  int pairs = 0;
  LipschitzConstants constants;
  BoxBounds box;
};

/// Draws responses at theta*, samples theta in the l1 ball of diameter D_theta around
/// theta*, and compares |sum_i (gamma_i(theta) - gamma_i(theta*) - E[...])| / |theta - theta*|_1
/// with sqrt(n) M_q evaluated on the same draw.
LipschitzCheck stochastic_lipschitz_check(const Matrix& X, const Coefficients& truth,
                                          double D_theta, int datasets, int thetas_per_dataset,
                                          double q0, std::uint64_t seed);

struct MaxResponseCheck {
  double empirical_mean = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  bool passed = false;
};

MaxResponseCheck max_response_check(const ConcentrationParams& params, int trials,
                                    std::uint64_t seed);

// ---- test instances ------------------------------------------------------------------

/// n independent NB laws with log mu, log k ~ U(-1, 1.5) and N(0, 1) weights.
ConcentrationParams heterogeneous_ensemble(Index n, std::uint64_t seed);

/// n points from 0 to 5 standard deviations of sum_i w_i (Y_i - mu_i).
std::vector<double> default_t_grid(const ConcentrationParams& params, int points = 20);

struct LipschitzInstance {
  Matrix X;
  Coefficients truth;
  double D_theta = 0.5;
};

/// Bounded U(-1, 1) design with moderate coefficients, so the response laws have light tails.
LipschitzInstance small_lipschitz_instance(Index n, Index p, std::uint64_t seed);

}  // namespace hnbr::theory
