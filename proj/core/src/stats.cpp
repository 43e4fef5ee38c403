#include "kgcurate/stats.hpp"

#include <cmath>
#include <limits>

#include "kgcurate/common.hpp"

namespace kgc::stats {

namespace {

// Continued fraction for I_x(a, b); converges for x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorKind::Numeric, "incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw Error(ErrorKind::Numeric, "t distribution needs df > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x);
  return t > 0 ? 1.0 - tail : tail;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

namespace {
double sum_sq_dev(std::span<const double> xs) {
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s;
}
}  // namespace

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  return sum_sq_dev(xs) / static_cast<double>(xs.size() - 1);
}

double population_variance(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return sum_sq_dev(xs) / static_cast<double>(xs.size());
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b, Alternative alternative) {
  if (a.size() < 2 || b.size() < 2) throw Error(ErrorKind::Numeric, "Welch test needs >= 2 values per sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = sample_variance(a) / na;
  const double vb = sample_variance(b) / nb;
  const double se2 = va + vb;
  if (!(se2 > 0.0)) throw Error(ErrorKind::Numeric, "Welch test inconclusive: both samples have zero variance");
  WelchResult r;
  r.t = (mean(a) - mean(b)) / std::sqrt(se2);
  r.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  switch (alternative) {
    case Alternative::TwoSided:
      r.p_value = regularized_incomplete_beta(0.5 * r.df, 0.5, r.df / (r.df + r.t * r.t));
      break;
    case Alternative::Less:
      r.p_value = student_t_cdf(r.t, r.df);
      break;
    case Alternative::Greater:
      r.p_value = student_t_cdf(-r.t, r.df);
      break;
  }
  r.p_value = std::min(1.0, std::max(0.0, r.p_value));
  return r;
}

}  // namespace kgc::stats
