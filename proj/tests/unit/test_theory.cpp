#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "hnbr/error.hpp"
#include "hnbr/model.hpp"
#include "hnbr/special.hpp"
#include "hnbr/theory.hpp"

using namespace hnbr;
namespace th = hnbr::theory;

namespace {

// E exp(Y / t) for Y ~ NB(mu, k) by direct pmf summation.
long double nb_mgf(double mu, double k, double t) {
  long double s = 0.0L;
  for (std::int64_t y = 0; y < 2000000; ++y) {
    const long double term = std::exp(static_cast<long double>(nb_log_pmf(y, mu, k)) + y / static_cast<long double>(t));
    s += term;
    if (y > 50 && term < 1e-22L * s) break;
  }
  return s;
}

// Largest eigenvalue of the Gram matrix of the selected columns by power iteration.
double power_top(const Matrix& G) {
  Vector v = Vector::Ones(G.rows()).normalized();
  double lam = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Vector w = G * v;
    const double nl = w.norm();
    if (nl == 0.0) return 0.0;
    w /= nl;
    if ((w - v).norm() < 1e-15) {
      v = w;
      break;
    }
    v = w;
    lam = nl;
  }
  return std::max(lam, v.dot(G * v));
}

double brute_isometry(const Matrix& X, Index l) {
  const Index p = X.cols();
  double best = 0.0;
  for (unsigned mask = 1; mask < (1u << p); ++mask) {
    if (static_cast<Index>(__builtin_popcount(mask)) > l) continue;
    std::vector<Index> cols;
    for (Index j = 0; j < p; ++j) {
      if (mask & (1u << j)) cols.push_back(j);
    }
    Matrix Xs(X.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) Xs.col(static_cast<Index>(c)) = X.col(cols[c]);
    best = std::max(best, power_top(Xs.transpose() * Xs));
  }
  return best;
}

}  // namespace

TEST(Theory, SubexpNormClosedForm) {
  // q = 1/2, k = 1: [log(1.5)]^-1, evaluated in long double as an independent oracle.
  const long double ref = 1.0L / std::log(1.5L);
  EXPECT_NEAR(th::subexp_norm(1.0, 1.0), static_cast<double>(ref), 1e-14);
  EXPECT_NEAR(th::subexp_norm(1.0, 1.0), 2.4663034623764317, 1e-12);
  EXPECT_NEAR(th::a_const(1.0, 1.0), 2.4663034623764317 + 1.0 / std::log(2.0), 1e-12);
  EXPECT_THROW(th::subexp_norm(0.0, 1.0), ArgumentError);
}

TEST(Theory, SubexpNormIsTheOrliczRadius) {
  for (double mu : {0.1, 1.0, 5.0, 20.0}) {
    for (double k : {0.2, 1.0, 10.0}) {
      const double t = th::subexp_norm(mu, k);
      const long double m = nb_mgf(mu, k, t);
      EXPECT_NEAR(static_cast<double>(m), 2.0, 1e-6) << mu << " " << k;
      EXPECT_LE(static_cast<double>(m), 2.0 + 1e-3);
      EXPECT_GT(static_cast<double>(nb_mgf(mu, k, 0.98 * t)), 2.0);
    }
  }
}

TEST(Theory, SubexpNormGrowsWithMean) {
  double prev = 0.0;
  for (double mu : {0.1, 0.5, 1.0, 4.0, 16.0}) {
    const double v = th::subexp_norm(mu, 2.0);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(Theory, ConcentrationBoundFormula) {
  th::ConcentrationParams p{{1.0, 2.0}, {1.0, 3.0}, {0.5, -1.5}};
  const double a1 = 0.5 * th::a_const(1.0, 1.0), a2 = 1.5 * th::a_const(2.0, 3.0);
  const double t = 4.0;
  const double e = std::min(t * t / (2.0 * (a1 * a1 + a2 * a2)), t / std::max(a1, a2));
  EXPECT_NEAR(th::concentration_bound_raw(p, t), 2.0 * std::exp(-0.25 * e), 1e-14);
  EXPECT_DOUBLE_EQ(th::concentration_bound(p, 0.0), 1.0);
  EXPECT_LE(th::concentration_bound(p, 1000.0), 1e-10);
  EXPECT_THROW(th::concentration_bound(p, -1.0), ArgumentError);
}

TEST(Theory, MaxResponseBoundFormula) {
  th::ConcentrationParams p{{3.0}, {2.0}, {1.0}};
  const double l2 = std::log(2.0);
  const double expected = 2.0 * th::subexp_norm(3.0, 2.0) * (l2 + std::sqrt(2.0 * l2)) + 3.0;
  EXPECT_NEAR(th::max_response_bound(p, 1), expected, 1e-12);
  EXPECT_THROW(th::max_response_bound(p, 2), ArgumentError);
  const auto big = th::heterogeneous_ensemble(100, 1);
  const auto small = th::heterogeneous_ensemble(10, 1);
  EXPECT_GT(th::max_response_bound(big, 100), 0.0);
  EXPECT_GT(th::max_response_bound(small, 10), 0.0);
}

TEST(Theory, NuIsNonlinearPartOfDispersionDerivative) {
  // d gamma / d s2 = nu + y k / (mu + k), checked by central differences of the per-row loss.
  auto row_loss = [](double s1, double s2, std::int64_t y) {
    const Dataset d((Matrix(1, 2) << 1.0, 0.0).finished(), {y});
    Coefficients c = Coefficients::zeros(2);
    c.theta1[0] = s1;
    c.theta2[0] = s2;
    return loss(d, c) + special::log_factorial(y);
  };
  for (double s1 : {-1.5, 0.0, 1.2}) {
    for (double s2 : {-1.0, 0.3, 1.8}) {
      for (std::int64_t y : {0, 1, 4, 30}) {
        const double h = 1e-5;
        const double fd = (row_loss(s1, s2 + h, y) - row_loss(s1, s2 - h, y)) / (2.0 * h);
        const double mu = std::exp(s1), k = std::exp(s2);
        EXPECT_NEAR(th::nu(s1, s2, y), fd - y * k / (mu + k), 1e-6 * std::max(1.0, std::fabs(fd)));
      }
    }
  }
}

TEST(Theory, DerivativeBoundsHoldOnSamples) {
  const th::BoxBounds box;
  const double F1 = th::bound_f1(box);
  const double e2 = std::exp(2.0), em2 = std::exp(-2.0);
  EXPECT_NEAR(F1, 50.0 * (1.0 + e2) + e2 + std::exp(6.0) / 2.0, 1e-9);
  EXPECT_GT(th::bound_f2(box), 0.0);
  (void)em2;
  const th::NuCheck c = th::nu_bounds_check(box, 20000, 3);
  EXPECT_EQ(c.f1_violations, 0);
  EXPECT_EQ(c.f2_violations, 0);
  EXPECT_LE(c.max_abs_nu, c.F1);
  EXPECT_LE(c.max_ratio, c.F2);
}

TEST(Theory, LipschitzConstantsStructure) {
  const th::BoxBounds box;
  const auto inst = th::small_lipschitz_instance(50, 4, 1);
  std::vector<double> mus(50, 1.0), ks(50, 2.0);
  const th::DesignStats st = th::design_stats(inst.X, mus, ks);
  EXPECT_EQ(st.n, 50);
  EXPECT_NEAR(st.max_a, th::a_const(1.0, 2.0), 1e-14);
  const auto q = th::ProbabilitySplit::equal(0.1);
  const th::LipschitzConstants c = th::lipschitz_constants(box, st, q);
  EXPECT_NEAR(c.A2, 32.0 * std::sqrt(2.0) * c.F2, 1e-9 * c.A2);
  EXPECT_GT(c.w1, 0.5);
  EXPECT_LT(c.w1, 1.0);
  EXPECT_NEAR(c.lip_bound, std::sqrt(50.0) * c.M_q, 1e-9 * c.lip_bound);
  EXPECT_GT(c.M_q, 0.0);
  EXPECT_GT(c.M_q_prime, 0.0);
  // Smaller failure probability can only enlarge the bound.
  const th::LipschitzConstants tighter = th::lipschitz_constants(box, st, th::ProbabilitySplit::equal(0.01));
  EXPECT_GT(tighter.M_q, c.M_q);
  EXPECT_THROW(th::ProbabilitySplit::equal(1.5), ArgumentError);
}

TEST(Theory, StochasticLipschitzSmallRun) {
  const auto inst = th::small_lipschitz_instance(30, 4, 2);
  const th::LipschitzCheck c = th::stochastic_lipschitz_check(inst.X, inst.truth, inst.D_theta, 5, 40, 0.1, 4);
  EXPECT_EQ(c.pairs, 200);
  EXPECT_EQ(c.violations, 0);
  EXPECT_GT(c.sup_ratio, 0.0);
  EXPECT_LE(c.sup_ratio, c.bound);
}

TEST(Theory, IsometryMatchesBruteForce) {
  Rng rng = make_stream(8, 0);
  std::normal_distribution<double> z;
  for (Index p : {3, 5, 8}) {
    Matrix X(20, p);
    for (Index i = 0; i < X.size(); ++i) X.data()[i] = z(rng);
    for (Index l = 1; l <= p; ++l) {
      const double exact = th::restricted_isometry(X, l);
      EXPECT_NEAR(exact, brute_isometry(X, l), 1e-9 * exact) << "p=" << p << " l=" << l;
    }
  }
}

TEST(Theory, IsometryBudget) {
  const Matrix X = Matrix::Identity(40, 40);
  EXPECT_THROW(th::restricted_isometry(X, 10, 1e5), BudgetExceeded);
  EXPECT_NEAR(th::restricted_isometry(X, 2), 1.0, 1e-12);
}

TEST(Theory, RestrictedEigenvalueProperties) {
  Rng rng = make_stream(9, 0);
  std::normal_distribution<double> z;
  Matrix X(60, 8);
  for (Index i = 0; i < X.size(); ++i) X.data()[i] = z(rng);
  th::ReBudget b;
  b.random_directions = 300;
  b.random_supports = 100;
  for (Index s = 1; s < 4; ++s) {
    EXPECT_LE(th::re_constant(X, s + 1, 2.0, b), th::re_constant(X, s, 2.0, b) + 1e-15);
  }
  for (double K : {1.5, 2.0, 3.0}) {
    EXPECT_LE(th::re_constant(X, 2, K + 1.0, b), th::re_constant(X, 2, K, b) + 1e-15);
  }
  Matrix D = X;
  D.col(5) = D.col(2);
  EXPECT_LT(th::re_constant(D, 2, 2.0, b), 0.05);
  // Orthogonal columns scaled so X'X / n = I: the restricted eigenvalue is exactly 1.
  Matrix Q = Eigen::HouseholderQR<Matrix>(X).householderQ() * Matrix::Identity(60, 8);
  Q *= std::sqrt(60.0);
  const double r = th::re_constant(Q, 2, 2.0, b);
  EXPECT_GT(r, 1.0 - 1e-9);
  EXPECT_LT(r, 1.0 + 1e-6);
}

TEST(Theory, KlProperties) {
  const auto c = th::link_from(0.4, -0.2);
  for (double d1 : {-0.5, 0.0, 0.5}) {
    for (double d2 : {-0.5, 0.0, 0.5}) {
      const auto s = th::link_from(0.4 + d1, -0.2 + d2);
      const double kl = th::kl_nb(s, c, th::kl_support(s, c));
      EXPECT_GE(kl, -1e-10);
      if (d1 == 0.0 && d2 == 0.0) {
        EXPECT_NEAR(kl, 0.0, 1e-14);
      } else {
        EXPECT_GT(kl, 1e-6);
      }
    }
  }
  auto ratio = [&](double h) {
    const auto s = th::link_from(0.4 + h, -0.2 - h);
    return th::kl_nb(s, c, th::kl_support(s, c)) / (2.0 * h * h);
  };
  EXPECT_NEAR(ratio(1e-3) / ratio(1e-2), 1.0, 0.1);
  EXPECT_THROW(th::kl_nb(c, c, 1), ArgumentError);
}

TEST(Theory, KlMatchesPoissonLimit) {
  // With k huge both laws are essentially Poisson: KL = m_c log(m_c/m_s) - m_c + m_s.
  const auto s = th::link_from(std::log(2.0), 25.0), c = th::link_from(std::log(3.0), 25.0);
  const double ref = 3.0 * std::log(1.5) - 3.0 + 2.0;
  EXPECT_NEAR(th::kl_nb(s, c, th::kl_support(s, c)), ref, 1e-8);
}

TEST(Theory, RateCheckRecoversSlope) {
  const std::vector<double> ns{100, 200, 400, 800};
  std::vector<double> e;
  for (double n : ns) e.push_back(7.0 / n);
  const th::RateCheck r = th::oracle_rate_check(ns, e);
  EXPECT_NEAR(r.slope, -1.0, 1e-12);
  EXPECT_NEAR(r.intercept, std::log(7.0), 1e-10);
  EXPECT_TRUE(r.monotone_decreasing);
  EXPECT_FALSE(th::oracle_rate_check({100, 200, 400}, {1.0, 0.5, 0.6}).monotone_decreasing);
  EXPECT_THROW(th::oracle_rate_check({100, 200}, {1.0, 0.5}), ArgumentError);
  EXPECT_THROW(th::oracle_rate_check({100, 100, 200}, {1.0, 0.5, 0.2}), ArgumentError);
}

TEST(Theory, OracleBoundScaling) {
  const double a = th::oracle_l2_bound(3, 10.0, 3.0, 0.5, 100.0, 0.2, 4.0);
  const double b = th::oracle_l2_bound(3, 20.0, 3.0, 0.5, 100.0, 0.2, 4.0);
  EXPECT_NEAR(b / a, 4.0, 1e-12);
  EXPECT_THROW(th::oracle_l2_bound(3, 10.0, 1.0, 0.5, 100.0, 0.2, 4.0), ArgumentError);
}

TEST(Theory, ConcentrationSmallRunPasses) {
  const auto params = th::heterogeneous_ensemble(20, 5);
  const auto grid = th::default_t_grid(params, 10);
  ASSERT_EQ(grid.size(), 10u);
  EXPECT_EQ(grid.front(), 0.0);
  const th::TailCheck c = th::concentration_check(params, grid, 5000, 6);
  EXPECT_TRUE(c.passed);
  for (std::size_t i = 0; i < c.t.size(); ++i) EXPECT_LE(c.empirical[i], c.bound[i] + 3.0 * c.std_error[i] + 1e-12);
}

TEST(Theory, MaxResponseSmallRunPasses) {
  const auto params = th::heterogeneous_ensemble(10, 3);
  const th::MaxResponseCheck c = th::max_response_check(params, 2000, 4);
  EXPECT_TRUE(c.passed);
  EXPECT_LE(c.empirical_mean, c.bound);
}
