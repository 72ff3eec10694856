#include "hnbr/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "hnbr/error.hpp"
#include "hnbr/special.hpp"

namespace hnbr::theory {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ArgumentError(std::string(what) + " must be finite");
}

double binomial(Index n, Index k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double out = 1.0;
  for (Index i = 1; i <= k; ++i) out = out * static_cast<double>(n - k + i) / static_cast<double>(i);
  return out;
}

// Calls fn(indices) for every increasing index tuple of length k drawn from [0, p).
template <typename Fn>
void for_each_subset(Index p, Index k, Fn&& fn) {
  std::vector<Index> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), Index{0});
  while (true) {
    fn(idx);
    Index pos = k - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == p - k + pos) --pos;
    if (pos < 0) return;
    ++idx[static_cast<std::size_t>(pos)];
    for (Index j = pos + 1; j < k; ++j) {
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

Matrix gram_of(const Matrix& X, const std::vector<Index>& cols) {
  const auto m = static_cast<Index>(cols.size());
  Matrix sub(X.rows(), m);
  for (Index j = 0; j < m; ++j) sub.col(j) = X.col(cols[static_cast<std::size_t>(j)]);
  return sub.transpose() * sub;
}

}  // namespace

void BoxBounds::validate() const {
  require_finite(m_s, "m_s");
  require_finite(M_s, "M_s");
  require_finite(M_x, "M_x");
  require_finite(D_theta, "D_theta");
  if (m_s > M_s) throw ArgumentError("box bounds need m_s <= M_s");
  if (M_y < 0) throw ArgumentError("M_y must be non-negative");
  if (!(M_x > 0.0) || !(D_theta > 0.0)) throw ArgumentError("M_x and D_theta must be positive");
}

void ConcentrationParams::validate() const {
  if (mus.empty()) throw ArgumentError("concentration params are empty");
  if (ks.size() != mus.size() || weights.size() != mus.size()) {
    throw ArgumentError("concentration params need equal-length mus, ks and weights");
  }
  for (std::size_t i = 0; i < mus.size(); ++i) {
    if (!(std::isfinite(mus[i]) && mus[i] > 0.0) || !(std::isfinite(ks[i]) && ks[i] > 0.0)) {
      throw ArgumentError("concentration params need finite positive mus and ks");
    }
    require_finite(weights[i], "weight");
  }
}

double subexp_norm(double mu, double k) {
  if (!(std::isfinite(mu) && mu > 0.0) || !(std::isfinite(k) && k > 0.0)) {
    throw ArgumentError("subexp_norm needs finite positive mu and k");
  }
  // (1 - (1-q) 2^{-1/k}) / q = 1 + (1-q)(1 - 2^{-1/k}) / q, with (1-q)/q = k/mu.
  const double shrink = -std::expm1(-kLn2 / k);
  const double arg = (k / mu) * shrink;
  const double lg = std::log1p(arg);
  if (!(lg > 0.0)) return std::numeric_limits<double>::infinity();
  return 1.0 / lg;
}

double a_const(double mu, double k) { return subexp_norm(mu, k) + mu / kLn2; }

double concentration_bound_raw(const ConcentrationParams& params, double t) {
  params.validate();
  if (!(t >= 0.0) || !std::isfinite(t)) throw ArgumentError("t must be finite and non-negative");
  double sum_sq = 0.0;
  double max_wa = 0.0;
  for (std::size_t i = 0; i < params.mus.size(); ++i) {
    const double wa = std::abs(params.weights[i]) * a_const(params.mus[i], params.ks[i]);
    sum_sq += wa * wa;
    max_wa = std::max(max_wa, wa);
  }
  if (max_wa == 0.0) return t > 0.0 ? 0.0 : 2.0;
  const double expo = std::min(t * t / (2.0 * sum_sq), t / max_wa);
  return 2.0 * std::exp(-0.25 * expo);
}

double concentration_bound(const ConcentrationParams& params, double t) {
  return std::clamp(concentration_bound_raw(params, t), 0.0, 1.0);
}

double max_response_bound(const ConcentrationParams& params, Index n) {
  params.validate();
  if (n < 1) throw ArgumentError("max_response_bound needs n >= 1");
  if (static_cast<Index>(params.mus.size()) != n) {
    throw ArgumentError("max_response_bound: params must have one entry per observation");
  }
  double excess = -std::numeric_limits<double>::infinity();
  double max_mu = 0.0;
  for (std::size_t i = 0; i < params.mus.size(); ++i) {
    excess = std::max(excess, a_const(params.mus[i], params.ks[i]) - params.mus[i] / kLn2);
    max_mu = std::max(max_mu, params.mus[i]);
  }
  const double l2n = std::log(2.0 * static_cast<double>(n));
  return 2.0 * excess * (l2n + std::sqrt(2.0 * l2n)) + max_mu;
}

double nu(double s1, double s2, std::int64_t y) {
  if (y < 0) throw ArgumentError("nu needs y >= 0");
  const double mu = std::exp(s1);
  const double k = std::exp(s2);
  return -k * special::digamma_diff(y, k) + k * special::softplus(s1 - s2) - mu * k / (mu + k);
}

double bound_f1(const BoxBounds& b) {
  b.validate();
  const double my = static_cast<double>(b.M_y);
  return my * (1.0 + std::exp(-b.m_s)) + std::exp(b.M_s) + std::exp(2.0 * b.M_s - b.m_s) / 2.0;
}

double bound_f2(const BoxBounds& b) {
  b.validate();
  const double eM = std::exp(b.M_s);
  const double em = std::exp(b.m_s);
  const double shifted = static_cast<double>(b.M_y) + eM;
  const double first = std::max(std::abs(eM * (1.0 + std::log(shifted) - 1.0 / (2.0 * shifted))),
                                std::abs(1.0 - b.m_s * em));
  const double second = std::exp(2.0 * b.M_s - b.m_s) + 2.0 * std::exp(2.0 * b.M_s) / (em + eM);
  return 2.0 * first + second + 1.5 * eM;
}

DesignStats design_stats(const Matrix& X, const std::vector<double>& mus,
                         const std::vector<double>& ks) {
  if (X.rows() < 1 || X.cols() < 1) throw ArgumentError("design_stats needs a non-empty design");
  if (static_cast<Index>(mus.size()) != X.rows() || ks.size() != mus.size()) {
    throw ArgumentError("design_stats needs one (mu, k) per row");
  }
  DesignStats s;
  s.n = X.rows();
  s.p = X.cols();
  s.max_col_sq = X.colwise().squaredNorm().maxCoeff();
  s.max_col_quartic = X.array().square().square().colwise().sum().maxCoeff();
  s.max_a_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mus.size(); ++i) {
    const double a = a_const(mus[i], ks[i]);
    s.sum_a4 += a * a * a * a;
    s.max_a = std::max(s.max_a, a);
    s.max_a_excess = std::max(s.max_a_excess, a - mus[i] / kLn2);
  }
  return s;
}

ProbabilitySplit ProbabilitySplit::equal(double q0) {
  if (!(q0 > 0.0 && q0 < 1.0)) throw ArgumentError("q0 must lie in (0, 1)");
  ProbabilitySplit q;
  q.random_bound.fill(q0 / 3.0);
  q.nonrandom_bound.fill(q0 / 4.0);
  return q;
}

void ProbabilitySplit::validate() const {
  auto check = [](auto const& arr) {
    double total = 0.0;
    for (const double v : arr) {
      if (!(v > 0.0 && v < 1.0)) throw ArgumentError("probability split entries must lie in (0, 1)");
      total += v;
    }
    if (!(total < 1.0)) throw ArgumentError("probability split must sum to q0 < 1");
  };
  check(random_bound);
  check(nonrandom_bound);
}

LipschitzConstants lipschitz_constants(const BoxBounds& b, const DesignStats& st,
                                       const ProbabilitySplit& q, double log_concavity_gamma) {
  b.validate();
  q.validate();
  if (st.n < 1 || st.p < 1) throw ArgumentError("design stats are empty");
  if (!(log_concavity_gamma > 0.0) || !std::isfinite(log_concavity_gamma)) {
    throw ArgumentError("log-convexity constant must be positive");
  }
  LipschitzConstants c;
  c.F1 = bound_f1(b);
  c.F2 = bound_f2(b);
  const double my = static_cast<double>(b.M_y);
  const double lip_term = c.F2 * b.M_x * b.D_theta;
  const double rt2 = std::sqrt(2.0);

  c.w1 = std::exp(b.M_s) / (std::exp(b.m_s) + std::exp(b.M_s));
  const double logistic = 1.0 / (1.0 + std::exp(b.m_s - b.M_s));
  c.w2 = (std::exp(1.0) + std::exp(b.M_s - b.m_s)) * logistic + logistic;
  const double w = std::max(c.w1, c.w2);

  c.A1 = rt2 * c.F1;
  c.A2 = 32.0 * rt2 * b.M_x * c.F2 * b.D_theta;
  c.A3 = rt2 * std::max(2.0 * (c.F1 + my), lip_term);
  c.A3_prime = 2.0 * rt2 *
               (c.F1 + std::max(2.0 * log_concavity_gamma * st.max_a_excess, lip_term));
  c.B = 6.0 * std::sqrt(2.0 * w * std::sqrt(st.sum_a4));
  c.C = 12.0 * b.M_x * w * st.max_a;
  c.D = 8.0 * std::max(2.0 * (c.F1 + my), lip_term) * b.M_x;

  const double p = static_cast<double>(st.p);
  const double n = static_cast<double>(st.n);
  const double col = std::sqrt(st.max_col_sq);
  const double quart = std::pow(st.max_col_quartic, 0.25);

  auto tail = [&](double q1, double q3) {
    const double l1 = std::log(2.0 * p / q1);
    return std::max(c.B * std::sqrt(l1) * quart, c.C * l1) + c.D * std::log(p / q3);
  };

  {
    const auto [q1, q2, q3] = q.random_bound;
    const double head =
        c.A1 * std::sqrt(std::log(2.0 * p / q2)) + c.A2 * std::sqrt(std::log(p)) +
        c.A3 * std::sqrt(std::log(p / q3));
    c.lip_bound = head * col + tail(q1, q3);
  }
  {
    const auto [q1, q2, q3, q4] = q.nonrandom_bound;
    const double head = c.A1 * std::sqrt(std::log(2.0 * p / q2)) + c.A2 * std::sqrt(std::log(p)) +
                        2.0 * c.A3_prime *
                            (std::log(2.0 * n / q4) + std::sqrt(std::log(n * p / q3)));
    c.lip_bound_prime = head * col + tail(q1, q3);
  }
  c.M_q = c.lip_bound / std::sqrt(n);
  c.M_q_prime = c.lip_bound_prime / std::sqrt(n);
  return c;
}

// ---- restricted eigenvalue -------------------------------------------------------------

namespace {

// ||Xv|| / (sqrt(n) ||v_T||) with T the s largest |v_j|, or +inf when v leaves the cone.
double cone_ratio(double xv_norm, const Vector& v, Index s, double K, double n) {
  std::vector<double> mags(static_cast<std::size_t>(v.size()));
  for (Index j = 0; j < v.size(); ++j) mags[static_cast<std::size_t>(j)] = std::abs(v[j]);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  double in_l1 = 0.0, in_l2 = 0.0, out_l1 = 0.0;
  for (std::size_t j = 0; j < mags.size(); ++j) {
    if (static_cast<Index>(j) < s) {
      in_l1 += mags[j];
      in_l2 += mags[j] * mags[j];
    } else {
      out_l1 += mags[j];
    }
  }
  if (in_l2 == 0.0) return std::numeric_limits<double>::infinity();
  if (out_l1 > K * in_l1 * (1.0 + 1e-12)) return std::numeric_limits<double>::infinity();
  return xv_norm / (std::sqrt(n) * std::sqrt(in_l2));
}

std::vector<Vector> re_pool(const Matrix& X, const ReBudget& budget) {
  const Index p = X.cols();
  const Matrix G = X.transpose() * X;
  std::vector<Vector> pool;

  auto embed_min_eigvec = [&](const std::vector<Index>& cols) {
    const Matrix sub = gram_of(X, cols);
    Eigen::SelfAdjointEigenSolver<Matrix> es(sub);
    Vector v = Vector::Zero(p);
    const Vector e = es.eigenvectors().col(0);
    for (std::size_t j = 0; j < cols.size(); ++j) v[cols[j]] = e[static_cast<Index>(j)];
    pool.push_back(std::move(v));
  };

  constexpr double kEnumerationCap = 20000.0;
  const Index max_size = std::min<Index>(p, std::max(1, budget.max_enumerated_support));
  for (Index m = 1; m <= max_size; ++m) {
    if (binomial(p, m) > kEnumerationCap) break;
    for_each_subset(p, m, embed_min_eigvec);
  }

  Rng rng = make_stream(budget.seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<Index> size_dist(1, p);

  std::vector<Index> perm(static_cast<std::size_t>(p));
  for (int r = 0; r < budget.random_supports; ++r) {
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const Index m = size_dist(rng);
    std::vector<Index> cols(perm.begin(), perm.begin() + m);
    std::sort(cols.begin(), cols.end());
    embed_min_eigvec(cols);
  }

  std::vector<Index> all(static_cast<std::size_t>(p));
  std::iota(all.begin(), all.end(), Index{0});
  embed_min_eigvec(all);

  // Random directions, each followed by a short Rayleigh-quotient descent whose
  // intermediate iterates also enter the pool.
  Eigen::SelfAdjointEigenSolver<Matrix> full(G, Eigen::EigenvaluesOnly);
  const double top = full.eigenvalues()(p - 1);
  for (int r = 0; r < budget.random_directions; ++r) {
    Vector v(p);
    for (Index j = 0; j < p; ++j) v[j] = normal(rng);
    pool.push_back(v);
    if (top <= 0.0) continue;
    for (int it = 1; it <= 20; ++it) {
      v.normalize();
      const Vector Gv = G * v;
      v -= (Gv - v.dot(Gv) * v) / top;
      if (it % 5 == 0) pool.push_back(v);
    }
  }
  return pool;
}

}  // namespace

double re_constant(const Matrix& X, Index s, double K, const ReBudget& budget) {
  if (X.rows() < 1 || X.cols() < 1) throw ArgumentError("re_constant needs a non-empty design");
  if (s < 1 || s > X.cols()) throw ArgumentError("re_constant needs 1 <= s <= p");
  if (!(K > 0.0) || !std::isfinite(K)) throw ArgumentError("re_constant needs finite K > 0");
  if (budget.random_directions < 0 || budget.random_supports < 0) {
    throw ArgumentError("re_constant budget must be non-negative");
  }
  const std::vector<Vector> pool = re_pool(X, budget);
  const double n = static_cast<double>(X.rows());
  double best = std::numeric_limits<double>::infinity();
  for (const Vector& v : pool) best = std::min(best, cone_ratio((X * v).norm(), v, s, K, n));
  return best;
}

double restricted_isometry(const Matrix& X, Index l, double max_subsets) {
  if (X.rows() < 1 || X.cols() < 1) throw ArgumentError("restricted_isometry needs a non-empty design");
  if (l < 1) throw ArgumentError("restricted_isometry needs l >= 1");
  const Index p = X.cols();
  const Index m = std::min(l, p);
  if (binomial(p, m) > max_subsets) {
    throw BudgetExceeded("restricted_isometry: C(" + std::to_string(p) + ", " + std::to_string(m) +
                         ") supports exceed the enumeration budget; use re_constant-style sampling");
  }
  // Top eigenvalues interlace, so supports of size exactly min(l, p) attain the maximum.
  double best = 0.0;
  for_each_subset(p, m, [&](const std::vector<Index>& cols) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram_of(X, cols), Eigen::EigenvaluesOnly);
    best = std::max(best, es.eigenvalues()(m - 1));
  });
  return best;
}

// ---- KL ------------------------------------------------------------------------------

LinkValues link_from(double s1, double s2) {
  require_finite(s1, "s1");
  require_finite(s2, "s2");
  return LinkValues{s1, s2, std::exp(s1), std::exp(s2)};
}

namespace {

// Streams log f(y) for y = 0, 1, ... by the ratio recurrence.
struct PmfStream {
  double k, log_ratio_tail, logf;
  std::int64_t y = 0;
  PmfStream(double mu, double kk)
      : k(kk), log_ratio_tail(-std::log1p(kk / mu)), logf(-kk * std::log1p(mu / kk)) {}
  void advance() {
    logf += std::log((static_cast<double>(y) + k) / (static_cast<double>(y) + 1.0)) + log_ratio_tail;
    ++y;
  }
};

void check_link(const LinkValues& v) {
  if (!(std::isfinite(v.mu) && v.mu > 0.0 && std::isfinite(v.k) && v.k > 0.0)) {
    throw ArgumentError("kl_nb needs finite positive mu and k");
  }
}

}  // namespace

std::int64_t kl_support(const LinkValues& s, const LinkValues& c, double tail) {
  check_link(s);
  check_link(c);
  if (!(tail > 0.0 && tail < 1.0)) throw ArgumentError("tail must lie in (0, 1)");
  constexpr std::int64_t kCap = 100000000;
  PmfStream fs(s.mu, s.k), fc(c.mu, c.k);
  long double ms = 0.0L, mc = 0.0L;
  while (true) {
    ms += std::exp(static_cast<long double>(fs.logf));
    mc += std::exp(static_cast<long double>(fc.logf));
    if (1.0L - ms < tail && 1.0L - mc < tail) return fs.y;
    if (fs.y >= kCap) throw BudgetExceeded("kl_support: pmf tails too heavy to truncate");
    fs.advance();
    fc.advance();
  }
}

double kl_nb(const LinkValues& s, const LinkValues& c, std::int64_t y_max) {
  check_link(s);
  check_link(c);
  if (y_max < 0) throw ArgumentError("kl_nb needs y_max >= 0");
  PmfStream fs(s.mu, s.k), fc(c.mu, c.k);
  long double ms = 0.0L, mc = 0.0L, kl = 0.0L;
  for (std::int64_t y = 0; y <= y_max; ++y) {
    const long double pc = std::exp(static_cast<long double>(fc.logf));
    ms += std::exp(static_cast<long double>(fs.logf));
    mc += pc;
    kl += pc * static_cast<long double>(fc.logf - fs.logf);
    if (y < y_max) {
      fs.advance();
      fc.advance();
    }
  }
  if (1.0L - ms >= 1e-12L || 1.0L - mc >= 1e-12L) {
    throw ArgumentError("kl_nb: pmf tail beyond y_max = " + std::to_string(y_max) +
                        " is >= 1e-12; increase y_max");
  }
  return static_cast<double>(kl);
}

// ---- oracle rate ----------------------------------------------------------------------

RateCheck oracle_rate_check(const std::vector<double>& ns, const std::vector<double>& errors) {
  if (ns.size() != errors.size()) throw ArgumentError("oracle_rate_check: size mismatch");
  std::map<double, double> by_n;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(ns[i] > 0.0) || !(errors[i] > 0.0) || !std::isfinite(errors[i])) {
      throw ArgumentError("oracle_rate_check needs positive n and finite positive errors");
    }
    if (!by_n.emplace(ns[i], errors[i]).second) {
      throw ArgumentError("oracle_rate_check: duplicate n value");
    }
  }
  if (by_n.size() < 3) throw ArgumentError("oracle_rate_check needs at least 3 distinct n values");

  RateCheck r;
  for (const auto& [n, e] : by_n) {
    r.ns.push_back(n);
    r.mean_sq_errors.push_back(e);
  }
  r.monotone_decreasing = true;
  for (std::size_t i = 1; i < r.ns.size(); ++i) {
    if (!(r.mean_sq_errors[i] < r.mean_sq_errors[i - 1])) r.monotone_decreasing = false;
  }
  const auto m = static_cast<double>(r.ns.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < r.ns.size(); ++i) {
    sx += std::log(r.ns[i]);
    sy += std::log(r.mean_sq_errors[i]);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < r.ns.size(); ++i) {
    const double dx = std::log(r.ns[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(r.mean_sq_errors[i]) - my);
  }
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  return r;
}

RateCheck oracle_rate_check(const std::vector<SimulationReport>& reports) {
  std::vector<double> ns, errs;
  for (const auto& rep : reports) {
    double total = 0.0;
    int used = 0;
    for (const auto& r : rep.per_rep) {
      if (!r.error.empty()) continue;
      total += r.ase1 + r.ase2;
      ++used;
    }
    if (used == 0) throw ArgumentError("oracle_rate_check: a report has no successful reps");
    ns.push_back(static_cast<double>(rep.config.n));
    errs.push_back(total / used);
  }
  return oracle_rate_check(ns, errs);
}

double oracle_l2_bound(double p1, double M_q_prime, double K, double kappa, double n,
                       double C_gamma, double sigma2) {
  if (!(K > 1.0) || !(kappa > 0.0) || !(n > 0.0) || !(C_gamma > 0.0) || !(p1 >= 0.0) ||
      !(sigma2 >= 0.0)) {
    throw ArgumentError("oracle_l2_bound: invalid constants");
  }
  const double lead = 8.0 * p1 * M_q_prime * M_q_prime * K * K /
                      (std::pow(kappa, 4) * n * n * C_gamma * C_gamma * (K - 1.0) * (K - 1.0));
  const double nk2 = n * kappa * kappa;
  return lead * (2.0 + K * K + 2.0 * (1.0 + 2.0 * p1 * K * K) * (nk2 + 2.0 * sigma2) / nk2);
}

// ---- Monte Carlo checks ---------------------------------------------------------------

TailCheck concentration_check(const ConcentrationParams& params, const std::vector<double>& t_grid,
                              int trials, std::uint64_t seed) {
  params.validate();
  if (trials < 1) throw ArgumentError("concentration_check needs trials >= 1");
  if (t_grid.empty()) throw ArgumentError("concentration_check needs a t grid");
  std::vector<long> hits(t_grid.size(), 0);
  constexpr int kBlock = 1000;
  for (int b = 0; b * kBlock < trials; ++b) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(b));
    const int end = std::min(trials, (b + 1) * kBlock);
    for (int tr = b * kBlock; tr < end; ++tr) {
      double sum = 0.0;
      for (std::size_t i = 0; i < params.mus.size(); ++i) {
        const auto y = static_cast<double>(sample_nb(params.mus[i], params.ks[i], rng));
        sum += params.weights[i] * (y - params.mus[i]);
      }
      const double a = std::abs(sum);
      for (std::size_t j = 0; j < t_grid.size(); ++j) {
        if (a >= t_grid[j]) ++hits[j];
      }
    }
  }
  TailCheck out;
  out.max_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    const double ph = static_cast<double>(hits[j]) / trials;
    const double se = std::sqrt(ph * (1.0 - ph) / trials);
    const double bnd = concentration_bound(params, t_grid[j]);
    out.t.push_back(t_grid[j]);
    out.empirical.push_back(ph);
    out.bound.push_back(bnd);
    out.std_error.push_back(se);
    out.max_excess = std::max(out.max_excess, ph - bnd - 3.0 * se);
  }
  out.passed = out.max_excess <= 0.0;
  return out;
}

NuCheck nu_bounds_check(const BoxBounds& box, int draws, std::uint64_t seed) {
  box.validate();
  if (draws < 1) throw ArgumentError("nu_bounds_check needs draws >= 1");
  NuCheck out;
  out.F1 = bound_f1(box);
  out.F2 = bound_f2(box);
  out.draws = draws;
  Rng rng = make_stream(seed, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> ydist(0, box.M_y);
  const double width = box.M_s - box.m_s;
  auto in_box = [&](double v) { return std::clamp(v, box.m_s, box.M_s); };
  for (int d = 0; d < draws; ++d) {
    const double s1 = box.m_s + width * unit(rng);
    const double s2 = box.m_s + width * unit(rng);
    const std::int64_t y = ydist(rng);
    const double v = nu(s1, s2, y);
    out.max_abs_nu = std::max(out.max_abs_nu, std::abs(v));
    if (std::abs(v) > out.F1) ++out.f1_violations;

    // Partner point at a log-uniform distance, covering near-derivative and global scales.
    const double scale = width * std::pow(10.0, -6.0 * unit(rng));
    const double t1 = in_box(s1 + scale * (2.0 * unit(rng) - 1.0));
    const double t2 = in_box(s2 + scale * (2.0 * unit(rng) - 1.0));
    const double dist = std::max(std::abs(t1 - s1), std::abs(t2 - s2));
    if (dist == 0.0) continue;
    const double ratio = std::abs(v - nu(t1, t2, y)) / dist;
    out.max_ratio = std::max(out.max_ratio, ratio);
    if (ratio > out.F2) ++out.f2_violations;
  }
  return out;
}

namespace {

// Per-row pieces needed to evaluate gamma_i(theta) - gamma_i(theta*) and its expectation.
struct RowLaw {
  double c1, c2, mu, k;
  std::vector<double> survival;  // P(Y > j), j = 0, 1, ...
};

RowLaw row_law(double c1, double c2) {
  RowLaw r{c1, c2, std::exp(c1), std::exp(c2), {}};
  PmfStream f(r.mu, r.k);
  long double cdf = 0.0L;
  while (true) {
    cdf += std::exp(static_cast<long double>(f.logf));
    const double surv = static_cast<double>(1.0L - cdf);
    if (surv < 1e-15) break;
    r.survival.push_back(surv);
    f.advance();
    if (f.y > 10000000) throw BudgetExceeded("stochastic_lipschitz_check: response tail too heavy");
  }
  return r;
}

// gamma(s, y) - gamma(c, y) with the log y! term cancelling.
double gamma_diff(double s1, double s2, const RowLaw& law, std::int64_t y) {
  const double k = std::exp(s2);
  double lg = 0.0;
  const double rel = (k - law.k);
  for (std::int64_t j = 0; j < y; ++j) lg += std::log1p(rel / (static_cast<double>(j) + law.k));
  const double yy = static_cast<double>(y);
  return -lg - yy * (s1 - law.c1) + (yy + k) * special::log_add_exp(s1, s2) -
         (yy + law.k) * special::log_add_exp(law.c1, law.c2) - k * s2 + law.k * law.c2;
}

double expected_gamma_diff(double s1, double s2, const RowLaw& law) {
  const double k = std::exp(s2);
  const double rel = (k - law.k);
  double lg = 0.0;
  for (std::size_t j = 0; j < law.survival.size(); ++j) {
    lg += std::log1p(rel / (static_cast<double>(j) + law.k)) * law.survival[j];
  }
  return -lg - law.mu * (s1 - law.c1) + (law.mu + k) * special::log_add_exp(s1, s2) -
         (law.mu + law.k) * special::log_add_exp(law.c1, law.c2) - k * s2 + law.k * law.c2;
}

}  // namespace

LipschitzCheck stochastic_lipschitz_check(const Matrix& X, const Coefficients& truth,
                                          double D_theta, int datasets, int thetas_per_dataset,
                                          double q0, std::uint64_t seed) {
  truth.validate();
  if (X.rows() < 1 || X.cols() != truth.p()) throw ArgumentError("design/truth dimension mismatch");
  if (!(D_theta > 0.0) || datasets < 1 || thetas_per_dataset < 1) {
    throw ArgumentError("stochastic_lipschitz_check: invalid sizes");
  }
  const Index n = X.rows();
  const Index p = X.cols();
  const Vector c1 = X * truth.theta1;
  const Vector c2 = X * truth.theta2;

  std::vector<RowLaw> laws;
  std::vector<double> mus, ks;
  for (Index i = 0; i < n; ++i) {
    laws.push_back(row_law(c1[i], c2[i]));
    mus.push_back(laws.back().mu);
    ks.push_back(laws.back().k);
  }
  const DesignStats stats = design_stats(X, mus, ks);
  const double M_x = X.cwiseAbs().maxCoeff();
  const double reach = M_x * D_theta / 2.0;
  const double lo = std::min(c1.minCoeff(), c2.minCoeff()) - reach;
  const double hi = std::max(c1.maxCoeff(), c2.maxCoeff()) + reach;

  LipschitzCheck out;
  out.sup_ratio = 0.0;
  out.bound = std::numeric_limits<double>::infinity();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  for (int d = 0; d < datasets; ++d) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(d));
    std::vector<std::int64_t> y(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = sample_nb(mus[i], ks[i], rng);

    BoxBounds box;
    box.m_s = lo;
    box.M_s = std::max(std::abs(lo), std::abs(hi));
    box.M_y = *std::max_element(y.begin(), y.end());
    box.M_x = M_x;
    box.D_theta = D_theta;
    const LipschitzConstants lc = lipschitz_constants(box, stats, ProbabilitySplit::equal(q0));
    if (lc.lip_bound < out.bound) {
      out.bound = lc.lip_bound;
      out.constants = lc;
      out.box = box;
    }

    for (int t = 0; t < thetas_per_dataset; ++t) {
      // Direction: one coordinate, two coordinates, or dense with random signs.
      Vector v = Vector::Zero(2 * p);
      const int kind = t % 3;
      std::uniform_int_distribution<Index> coord(0, 2 * p - 1);
      if (kind == 0) {
        v[coord(rng)] = 1.0;
      } else if (kind == 1) {
        v[coord(rng)] += expo(rng);
        v[coord(rng)] -= expo(rng);
      } else {
        for (Index j = 0; j < 2 * p; ++j) v[j] = (unit(rng) < 0.5 ? -1.0 : 1.0) * expo(rng);
      }
      if (unit(rng) < 0.5) v = -v;
      const double l1 = v.lpNorm<1>();
      if (l1 == 0.0) continue;
      const double radius = (D_theta / 2.0) * std::pow(10.0, -4.0 * unit(rng));
      v *= radius / l1;

      const Vector ds1 = X * v.head(p);
      const Vector ds2 = X * v.tail(p);
      double centered = 0.0;
      for (Index i = 0; i < n; ++i) {
        const auto& law = laws[static_cast<std::size_t>(i)];
        const double s1 = law.c1 + ds1[i];
        const double s2 = law.c2 + ds2[i];
        centered += gamma_diff(s1, s2, law, y[static_cast<std::size_t>(i)]) -
                    expected_gamma_diff(s1, s2, law);
      }
      const double ratio = std::abs(centered) / v.lpNorm<1>();
      out.sup_ratio = std::max(out.sup_ratio, ratio);
      if (ratio > lc.lip_bound) ++out.violations;
      ++out.pairs;
    }
  }
  return out;
}

MaxResponseCheck max_response_check(const ConcentrationParams& params, int trials,
                                    std::uint64_t seed) {
  params.validate();
  if (trials < 2) throw ArgumentError("max_response_check needs trials >= 2");
  const auto n = static_cast<Index>(params.mus.size());
  double sum = 0.0, sum_sq = 0.0;
  constexpr int kBlock = 1000;
  for (int b = 0; b * kBlock < trials; ++b) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(b));
    const int end = std::min(trials, (b + 1) * kBlock);
    for (int tr = b * kBlock; tr < end; ++tr) {
      std::int64_t mx = 0;
      for (Index i = 0; i < n; ++i) {
        mx = std::max(mx, sample_nb(params.mus[static_cast<std::size_t>(i)],
                                    params.ks[static_cast<std::size_t>(i)], rng));
      }
      const auto v = static_cast<double>(mx);
      sum += v;
      sum_sq += v * v;
    }
  }
  MaxResponseCheck out;
  out.empirical_mean = sum / trials;
  const double var = std::max(0.0, (sum_sq - trials * out.empirical_mean * out.empirical_mean) / (trials - 1));
  out.std_error = std::sqrt(var / trials);
  out.bound = max_response_bound(params, n);
  out.passed = out.empirical_mean <= out.bound;
  return out;
}

ConcentrationParams heterogeneous_ensemble(Index n, std::uint64_t seed) {
  if (n < 1) throw ArgumentError("heterogeneous_ensemble needs n >= 1");
  Rng rng = make_stream(seed, 0);
  std::uniform_real_distribution<double> logu(-1.0, 1.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  ConcentrationParams out;
  for (Index i = 0; i < n; ++i) {
    out.mus.push_back(std::exp(logu(rng)));
    out.ks.push_back(std::exp(logu(rng)));
    out.weights.push_back(normal(rng));
  }
  return out;
}

std::vector<double> default_t_grid(const ConcentrationParams& params, int points) {
  params.validate();
  if (points < 2) throw ArgumentError("default_t_grid needs at least 2 points");
  double var = 0.0;
  for (std::size_t i = 0; i < params.mus.size(); ++i) {
    const double mu = params.mus[i];
    var += params.weights[i] * params.weights[i] * (mu + mu * mu / params.ks[i]);
  }
  const double top = 5.0 * std::sqrt(var);
  std::vector<double> t(static_cast<std::size_t>(points));
  for (int j = 0; j < points; ++j) t[static_cast<std::size_t>(j)] = top * j / (points - 1);
  return t;
}

LipschitzInstance small_lipschitz_instance(Index n, Index p, std::uint64_t seed) {
  if (n < 1 || p < 1) throw ArgumentError("small_lipschitz_instance needs n, p >= 1");
  Rng rng = make_stream(seed, 0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  LipschitzInstance inst;
  inst.X.resize(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) inst.X(i, j) = unif(rng);
  }
  inst.truth = Coefficients::zeros(p);
  const double t1[] = {0.5, 0.8, -0.5};
  const double t2[] = {-0.3, 0.4, 0.5};
  for (Index j = 0; j < std::min<Index>(p, 3); ++j) {
    inst.truth.theta1[j] = t1[j];
    inst.truth.theta2[j] = t2[j];
  }
  return inst;
}

}  // namespace hnbr::theory
