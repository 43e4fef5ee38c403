#pragma once

#include <span>

namespace kgc::stats {

/// I_x(a, b), evaluated with a Lentz continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `df` degrees of freedom (df may be fractional).
double student_t_cdf(double t, double df);

double mean(std::span<const double> xs);
/// Unbiased (n - 1) sample variance.
double sample_variance(std::span<const double> xs);
/// Population (n) variance.
double population_variance(std::span<const double> xs);

enum class Alternative { TwoSided, Less, Greater };

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/// Welch's unequal-variance t-test of mean(a) vs mean(b). Throws
/// Error(Numeric) when either sample has fewer than 2 values or both have
/// zero variance (the test is inconclusive).
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b,
                         Alternative alternative = Alternative::TwoSided);

}  // namespace kgc::stats
