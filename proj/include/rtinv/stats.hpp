#pragma once

#include <span>

namespace rtinv::stats {

double normal_cdf(double z);

/// I_x(a, b), evaluated with a modified-Lentz continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

/// Inverse of student_t_cdf for p in (0, 1).
double student_t_quantile(double p, double dof);

struct KsResult {
  double statistic = 0.0;
  double critical_value = 0.0;
  bool reject = false;
};

/// One-sample Kolmogorov-Smirnov test of `sample` against a normal law with
/// the sample's own mean and standard deviation. Uses the asymptotic
/// critical value sqrt(-ln(alpha/2)/2)/sqrt(n); no Lilliefors correction is
/// applied, so the test is conservative when parameters are estimated.
KsResult ks_gaussian_test(std::span<const double> sample, double alpha);

}  // namespace rtinv::stats
