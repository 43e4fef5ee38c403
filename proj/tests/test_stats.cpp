#include <gtest/gtest.h>

#include <cmath>

#include <boost/math/special_functions/beta.hpp>

#include "kgcurate/common.hpp"
#include "kgcurate/stats.hpp"
#include "support.hpp"

using namespace kgc;

TEST(Stats, IncompleteBetaAgainstBoost) {
  for (double a : {0.5, 1.0, 2.5, 10.0, 40.0})
    for (double b : {0.5, 3.0, 17.0})
      for (double x : {0.001, 0.2, 0.5, 0.77, 0.999})
        EXPECT_NEAR(stats::regularized_incomplete_beta(a, b, x), boost::math::ibeta(a, b, x), 1e-10)
            << a << " " << b << " " << x;
}

TEST(Stats, StudentCdfSymmetry) {
  EXPECT_NEAR(stats::student_t_cdf(0.0, 5.0), 0.5, 1e-15);
  EXPECT_NEAR(stats::student_t_cdf(1.3, 7.2) + stats::student_t_cdf(-1.3, 7.2), 1.0, 1e-12);
}

TEST(Stats, Moments) {
  const std::vector<double> x = {0, 1, 3};
  EXPECT_DOUBLE_EQ(stats::mean(x), 4.0 / 3.0);
  EXPECT_NEAR(stats::population_variance(x), 14.0 / 9.0, 1e-15);
  EXPECT_NEAR(stats::sample_variance(x), 14.0 / 6.0, 1e-15);
}

TEST(Welch, IdenticalSamples) {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  EXPECT_GT(stats::welch_t_test(a, a).p_value, 0.99);
}

TEST(Welch, SeparatedSamplesWithJitter) {
  Rng rng(1);
  std::vector<double> a(10), b(10);
  for (auto& v : a) v = 0.1 + 1e-3 * rng.uniform(-1, 1);
  for (auto& v : b) v = 5.0 + 1e-3 * rng.uniform(-1, 1);
  const double p = stats::welch_t_test(a, b).p_value;
  EXPECT_LT(p, 0.001);
  EXPECT_NEAR(p, oracle::welch_p_oracle(a, b), 1e-12);
}

TEST(Welch, SymmetricAndMatchesOracle) {
  Rng rng(2);
  for (int k = 0; k < 30; ++k) {
    std::vector<double> a(3 + rng.below(20)), b(3 + rng.below(20));
    for (auto& v : a) v = rng.uniform(0, 2);
    for (auto& v : b) v = rng.uniform(0.3, 2.5);
    const double p = stats::welch_t_test(a, b).p_value;
    EXPECT_NEAR(p, stats::welch_t_test(b, a).p_value, 1e-14);
    EXPECT_NEAR(p, oracle::welch_p_oracle(a, b), 1e-9);
  }
}

TEST(Welch, OneSidedHalves) {
  const std::vector<double> a = {1, 2, 3, 4}, b = {2.5, 3.5, 4.5, 6};
  const auto two = stats::welch_t_test(a, b).p_value;
  const auto less = stats::welch_t_test(a, b, stats::Alternative::Less).p_value;
  const auto greater = stats::welch_t_test(a, b, stats::Alternative::Greater).p_value;
  EXPECT_NEAR(less, two / 2, 1e-12);
  EXPECT_NEAR(less + greater, 1.0, 1e-12);
}

TEST(Welch, DegenerateIsNumericError) {
  const std::vector<double> a = {1, 1, 1}, b = {2, 2, 2}, one = {1};
  for (auto* pair : {&b, &one}) {
    try {
      stats::welch_t_test(a, *pair);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Numeric);
    }
  }
}
