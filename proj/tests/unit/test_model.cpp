#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "hnbr/error.hpp"
#include "hnbr/model.hpp"
#include "hnbr/special.hpp"

using namespace hnbr;

namespace {

// Direct evaluation of the NB log pmf from lgammal, independent of the library's special functions.
long double ref_log_pmf(std::int64_t y, long double mu, long double k) {
  const long double ly = static_cast<long double>(y);
  return std::lgamma(ly + k) - std::lgamma(k) - std::lgamma(ly + 1.0L) + k * std::log(k / (k + mu)) +
         ly * std::log(mu / (k + mu));
}

}  // namespace

TEST(Model, DatasetValidation) {
  EXPECT_THROW(Dataset(Matrix::Zero(3, 2), {1, 2}), ArgumentError);
  EXPECT_THROW(Dataset(Matrix::Zero(2, 1), {1, -1}), ArgumentError);
  Matrix X = Matrix::Zero(2, 1);
  X(0, 0) = std::nan("");
  EXPECT_THROW(Dataset(X, {1, 1}), ArgumentError);
  EXPECT_THROW(Dataset(Matrix::Zero(2, 2), {0, 3}, {"a"}), ArgumentError);
  const Dataset ok(Matrix::Zero(2, 2), {0, 3}, {"a", "b"});
  EXPECT_EQ(ok.n(), 2);
}

TEST(Model, LogPmfMatchesDirectFormula) {
  for (double mu : {0.1, 1.0, 7.5, 20.0}) {
    for (double k : {0.1, 0.9, 5.0, 20.0}) {
      for (std::int64_t y : {0, 1, 3, 12, 60}) {
        EXPECT_NEAR(nb_log_pmf(y, mu, k), static_cast<double>(ref_log_pmf(y, mu, k)), 1e-11);
      }
    }
  }
}

TEST(Model, RealValuedCountMustBeIntegral) {
  EXPECT_NEAR(nb_log_pmf(3.0, 2.0, 1.5), nb_log_pmf(std::int64_t{3}, 2.0, 1.5), 0.0);
  EXPECT_THROW(nb_log_pmf(2.5, 2.0, 1.5), ArgumentError);
  EXPECT_THROW(nb_log_pmf(-1.0, 2.0, 1.5), ArgumentError);
  EXPECT_THROW(nb_log_pmf(std::int64_t{1}, 0.0, 1.5), ArgumentError);
}

TEST(Model, PmfNormalizesAndHasNbMoments) {
  for (double mu : {0.1, 2.0, 20.0}) {
    for (double k : {0.1, 1.0, 20.0}) {
      long double total = 0.0L, m1 = 0.0L, m2 = 0.0L;
      for (std::int64_t y = 0; y < 200000; ++y) {
        const long double f = std::exp(static_cast<long double>(nb_log_pmf(y, mu, k)));
        total += f;
        m1 += f * y;
        m2 += f * static_cast<long double>(y) * y;
        if (y > 10 * mu && f < 1e-300L) break;
      }
      EXPECT_NEAR(static_cast<double>(total), 1.0, 1e-9);
      const double mean = static_cast<double>(m1);
      const double var = static_cast<double>(m2 - m1 * m1);
      EXPECT_NEAR(mean, mu, 1e-7 * std::max(1.0, mu));
      EXPECT_NEAR(var, mu + mu * mu / k, 1e-6 * (mu + mu * mu / k));
    }
  }
}

TEST(Model, PoissonLimit) {
  for (std::int64_t y : {0, 2, 9}) {
    EXPECT_NEAR(nb_log_pmf(y, 3.0, 1e9), poisson_log_pmf(y, 3.0), 1e-7);
  }
}

TEST(Model, LossIsNegativeMeanLogPmfWithoutFactorials) {
  Coefficients truth = SimulationConfig::default_truth(3);
  const Dataset d = fixtures::random_dataset(30, truth, 1);
  Coefficients th = Coefficients::zeros(3);
  th.theta1 << 0.3, -0.2, 0.1;
  th.theta2 << 0.1, 0.4, -0.3;
  const auto links = linear_predictors(d, th);
  long double nll = 0.0L;
  for (Index i = 0; i < d.n(); ++i) {
    nll -= ref_log_pmf(d.y[static_cast<std::size_t>(i)], links[static_cast<std::size_t>(i)].mu,
                       links[static_cast<std::size_t>(i)].k);
  }
  const double expected = static_cast<double>(nll / d.n()) - log_factorial_mean(d);
  EXPECT_NEAR(loss(d, th), expected, 1e-11);
}

TEST(Model, GradientMatchesCentralDifferences) {
  Rng rng = make_stream(5, 0);
  std::uniform_int_distribution<int> nd(2, 20), pd(1, 5);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const Index n = nd(rng), p = pd(rng);
    const Coefficients truth = fixtures::random_coefficients(p, 0.4, rng);
    const Dataset d = fixtures::random_dataset(n, truth, 1000 + inst);
    const Coefficients th = fixtures::random_coefficients(p, 0.5, rng);
    const Vector g = grad(d, th);
    for (Index j = 0; j < 2 * p; ++j) {
      const double h = 1e-6;
      Coefficients a = th, b = th;
      if (j < p) {
        a.theta1[j] += h;
        b.theta1[j] -= h;
      } else {
        a.theta2[j - p] += h;
        b.theta2[j - p] -= h;
      }
      const double fd = (loss(d, a) - loss(d, b)) / (2.0 * h);
      worst = std::max(worst, std::fabs(g[j] - fd) / std::max(1.0, std::fabs(fd)));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Model, EvaluateAgreesWithLossAndGrad) {
  const Coefficients truth = SimulationConfig::default_truth(4);
  const Dataset d = fixtures::random_dataset(25, truth, 3);
  const Evaluation e = evaluate(d, truth, EvalOptions{});
  EXPECT_DOUBLE_EQ(e.loss, loss(d, truth));
  Vector g(8);
  g << e.grad1, e.grad2;
  EXPECT_LT((g - grad(d, truth)).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(Model, ClampKeepsLossFinite) {
  Dataset d(Matrix::Constant(3, 1, 1.0), {0, 5, 1000});
  Coefficients th = Coefficients::zeros(1);
  th.theta1[0] = 500.0;
  th.theta2[0] = -500.0;
  EXPECT_TRUE(std::isfinite(loss(d, th)));
  EXPECT_TRUE(grad(d, th).allFinite());
}

TEST(Model, LossInvariantToRowPermutation) {
  const Coefficients truth = SimulationConfig::default_truth(3);
  const Dataset d = fixtures::random_dataset(40, truth, 9);
  std::vector<Index> perm(static_cast<std::size_t>(d.n()));
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 7, perm.end());
  Matrix X(d.n(), d.p());
  std::vector<std::int64_t> y(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    X.row(static_cast<Index>(i)) = d.X.row(perm[i]);
    y[i] = d.y[static_cast<std::size_t>(perm[i])];
  }
  const Dataset dp(X, y);
  EXPECT_NEAR(loss(d, truth), loss(dp, truth), 1e-12);
  EXPECT_LT((grad(d, truth) - grad(dp, truth)).lpNorm<Eigen::Infinity>(), 1e-12);
}
