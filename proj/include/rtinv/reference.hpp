#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rtinv/constraints.hpp"
#include "rtinv/expr.hpp"
#include "rtinv/ode_operator.hpp"
#include "rtinv/solver.hpp"

namespace rtinv::reference {

// ---------------------------------------------------------------------------
// Runge-Kutta baseline

/// u' = f(x, u) obtained from an OdeSpec by companion reduction, with
/// u = (y, y', ..., y^(m-1)).
struct FirstOrderSystem {
  int dimension = 0;
  std::function<void(double x, const Vector& u, Vector& du)> rhs;
  double x0 = 0.0;
  Vector u0;
};

/// Requires the forcing expression and an initial-value constraint set
/// (orders 0..m-1, each exactly once, all at spec.lo).
FirstOrderSystem companion_system(const OdeSpec& spec,
                                  const std::vector<Constraint>& constraints);

struct Rk45Result {
  std::vector<double> nodes;
  std::vector<Vector> states;
  std::size_t rejected_steps = 0;
};

/// Dormand-Prince 5(4) with the elementary controller
/// h *= clamp(0.9 err^(-1/5), 0.2, 5). Returns accepted-step abscissae
/// including both ends.
Rk45Result rk45_solve(const FirstOrderSystem& sys, double lo, double hi, double rtol,
                      double atol);

// ---------------------------------------------------------------------------
// Test problems

struct TestProblem {
  std::string name;
  std::string description;
  OdeSpec spec;  // forcing = analytic g(x)
  std::vector<Constraint> constraints;
  Expression solution;
  std::size_t default_n = 0;
  int default_support = 0;
};

/// testA, testB, testC, testE, testA_pil, testC_pil, testE_pil.
TestProblem test_problem(const std::string& name);
std::vector<std::string> test_problem_names();

/// Coefficients (highest degree first) of the 8th-degree Test E polynomial
/// exactly as printed to five significant figures.
std::vector<double> test_e_printed_coefficients();

/// Smallest coefficient change to `base` (highest degree first) that makes
/// the polynomial satisfy every constraint exactly.
std::vector<double> constrained_polynomial(const std::vector<double>& base,
                                           const std::vector<Constraint>& constraints);

double polynomial_value(const std::vector<double>& coeffs, double x, int derivative = 0);
Expression polynomial_expression(const std::vector<double>& coeffs, int derivative = 0);

struct TestReport {
  std::string problem;
  std::size_t n = 0;
  int support = 0;
  DerivativeScheme scheme = DerivativeScheme::Composed;
  std::vector<double> nodes;
  Vector y;
  Vector y_analytic;
  Vector error;  // y - y_analytic
  double error_2norm = 0.0;
  double relative_error = 0.0;
  double max_abs_error = 0.0;
  double prepare_seconds = 0.0;
  double solve_seconds = 0.0;  // mean per run-time solve
  bool well_posed = false;
};

/// Uniform grid over the problem interval unless `grid` is given.
TestReport run_test_problem(const TestProblem& tp, std::size_t n, int support,
                            DerivativeScheme scheme = DerivativeScheme::Composed,
                            const std::optional<NodeGrid>& grid = std::nullopt,
                            int timing_repeats = 1000);

struct BaselineReport {
  std::vector<double> nodes;
  double error_2norm = 0.0;
  double seconds = 0.0;
};

/// RK45 on an initial-value test problem, error against the analytic
/// solution on the returned nodes.
BaselineReport run_rk45_baseline(const TestProblem& tp, double rtol, double atol);

struct SweepPoint {
  int support = 0;
  double relative_error = 0.0;  // +inf when L F is numerically rank deficient
  std::string failure;
};

/// Supports are validated up front; a support whose L F loses numerical
/// rank is recorded as a failed point rather than aborting the sweep.
std::vector<SweepPoint> support_sweep(const TestProblem& tp, std::size_t n,
                                      const std::vector<int>& supports,
                                      DerivativeScheme scheme = DerivativeScheme::Composed);
int sweep_argmin(const std::vector<SweepPoint>& sweep);

struct MonteCarloResult {
  Vector y_analytic;
  Vector mean;
  Vector bias;  // mean - y_analytic
  Vector sample_sigma;
  Vector predicted_sigma;
  double sigma_g = 0.0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
};

/// 1% of max |g| over the problem's nodes: the noise rule of the gradient
/// reconstruction experiment.
double default_noise_sigma(const TestProblem& tp, const NodeGrid& grid);

/// Perturbs the analytic forcing with i.i.d. N(0, sigma^2) noise k times.
/// Iteration i draws from a generator seeded by (seed, i) and results are
/// reduced in iteration order, so the output does not depend on the number
/// of threads.
MonteCarloResult monte_carlo(const TestProblem& tp, std::size_t n, int support, double sigma,
                             std::size_t k, std::uint64_t seed,
                             DerivativeScheme scheme = DerivativeScheme::Composed);

}  // namespace rtinv::reference
