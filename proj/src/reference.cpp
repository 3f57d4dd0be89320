#include "rtinv/reference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include <Eigen/SVD>

#include "rtinv/errors.hpp"

namespace rtinv::reference {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Expression> coeffs(std::initializer_list<const char*> texts) {
  std::vector<Expression> out;
  for (const char* t : texts) out.push_back(Expression::parse(t));
  return out;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

FirstOrderSystem companion_system(const OdeSpec& spec,
                                  const std::vector<Constraint>& constraints) {
  if (!spec.forcing) {
    throw Error(ErrorCode::InvalidArgument, "RK45 baseline needs a forcing expression");
  }
  const int m = spec.order;
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "companion form needs order >= 1");
  if (constraints.size() != static_cast<std::size_t>(m)) {
    throw Error(ErrorCode::InvalidArgument,
                "initial-value problem needs exactly m constraints");
  }
  Vector u0 = Vector::Constant(m, std::numeric_limits<double>::quiet_NaN());
  for (const Constraint& c : constraints) {
    if (c.location != spec.lo || c.order < 0 || c.order >= m || !std::isnan(u0[c.order])) {
      throw Error(ErrorCode::InvalidArgument,
                  "constraints are not initial values y^(0..m-1)(lo)");
    }
    u0[c.order] = c.value;
  }

  FirstOrderSystem sys;
  sys.dimension = m;
  sys.x0 = spec.lo;
  sys.u0 = u0;
  sys.rhs = [spec](double x, const Vector& u, Vector& du) {
    const int order = spec.order;
    double acc = spec.forcing->evaluate(x);
    for (int i = 0; i < order; ++i) {
      acc -= spec.coefficients[static_cast<std::size_t>(i)].evaluate(x) * u[i];
      if (i + 1 < order) du[i] = u[i + 1];
    }
    du[order - 1] = acc / spec.coefficients[static_cast<std::size_t>(order)].evaluate(x);
  };
  return sys;
}

Rk45Result rk45_solve(const FirstOrderSystem& sys, double lo, double hi, double rtol,
                      double atol) {
  if (!(rtol > 0.0) || !(atol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "rtol and atol must be positive");
  }
  if (!(hi > lo)) throw Error(ErrorCode::InvalidArgument, "empty integration span");

  // Dormand-Prince 5(4) tableau
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const int d = sys.dimension;
  Rk45Result out;
  double x = lo;
  Vector u = sys.u0;
  out.nodes.push_back(x);
  out.states.push_back(u);

  Vector k1(d), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d), tmp(d), un(d), err(d);
  sys.rhs(x, u, k1);

  // initial step from the first derivative scale
  const auto scale = [&](const Vector& a, const Vector& b) {
    return (atol + rtol * a.cwiseAbs().cwiseMax(b.cwiseAbs()).array()).matrix();
  };
  double h;
  {
    const Vector sc = scale(u, u);
    const double d0 = std::sqrt((u.cwiseQuotient(sc)).squaredNorm() / d);
    const double d1 = std::sqrt((k1.cwiseQuotient(sc)).squaredNorm() / d);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, hi - lo);
  }

  while (x < hi) {
    const double hmin = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x));
    if (h < hmin) {
      throw Error(ErrorCode::StiffnessFailure,
                  "step size underflow at x = " + std::to_string(x));
    }
    const bool last = x + h >= hi;
    if (last) h = hi - x;

    tmp = u + h * a21 * k1;
    sys.rhs(x + c2 * h, tmp, k2);
    tmp = u + h * (a31 * k1 + a32 * k2);
    sys.rhs(x + c3 * h, tmp, k3);
    tmp = u + h * (a41 * k1 + a42 * k2 + a43 * k3);
    sys.rhs(x + c4 * h, tmp, k4);
    tmp = u + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    sys.rhs(x + c5 * h, tmp, k5);
    tmp = u + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    sys.rhs(x + h, tmp, k6);
    un = u + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    sys.rhs(x + h, un, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const double en = std::sqrt(err.cwiseQuotient(scale(u, un)).squaredNorm() / d);
    const double factor =
        en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
    if (en <= 1.0) {
      x = last ? hi : x + h;
      u = un;
      k1 = k7;  // first-same-as-last
      out.nodes.push_back(x);
      out.states.push_back(u);
      h *= std::min(factor, 5.0);
    } else {
      ++out.rejected_steps;
      h *= std::min(factor, 1.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> test_e_printed_coefficients() {
  return {-0.46985, 0.41127, 0.34891, 0.03827, 1.0323, -1.5886, -0.88426, 1.0, 0.011895};
}

double polynomial_value(const std::vector<double>& c, double x, int derivative) {
  // Horner on the differentiated coefficient list
  const int deg = static_cast<int>(c.size()) - 1;
  double acc = 0.0;
  for (int k = 0; k <= deg - derivative; ++k) {
    const int power = deg - k;
    double f = 1.0;
    for (int j = 0; j < derivative; ++j) f *= power - j;
    acc = acc * x + f * c[static_cast<std::size_t>(k)];
  }
  return acc;
}

Expression polynomial_expression(const std::vector<double>& c, int derivative) {
  const int deg = static_cast<int>(c.size()) - 1;
  std::string text;
  for (int k = 0; k <= deg - derivative; ++k) {
    const int power = deg - k;
    double f = 1.0;
    for (int j = 0; j < derivative; ++j) f *= power - j;
    const int out_power = power - derivative;
    if (!text.empty()) text += " + ";
    text += "(" + fmt17(f * c[static_cast<std::size_t>(k)]) + ")";
    if (out_power > 0) text += "*x^" + std::to_string(out_power);
  }
  if (text.empty()) text = "0";
  return Expression::parse(text);
}

std::vector<double> constrained_polynomial(const std::vector<double>& base,
                                           const std::vector<Constraint>& constraints) {
  const auto nc = static_cast<Eigen::Index>(base.size());
  const auto p = static_cast<Eigen::Index>(constraints.size());
  Matrix A(p, nc);
  Vector r(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const Constraint& c = constraints[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < nc; ++k) {
      std::vector<double> unit(base.size(), 0.0);
      unit[static_cast<std::size_t>(k)] = 1.0;
      A(i, k) = polynomial_value(unit, c.location, c.order);
    }
    r[i] = c.value - polynomial_value(base, c.location, c.order);
  }
  const Vector delta = A.completeOrthogonalDecomposition().solve(r);
  std::vector<double> out(base);
  for (Eigen::Index k = 0; k < nc; ++k) out[static_cast<std::size_t>(k)] += delta[k];
  return out;
}

namespace {

TestProblem problem_a(std::size_t n, int ls, double hi, std::string name, std::string desc) {
  TestProblem tp{std::move(name), std::move(desc),
                 OdeSpec{3, coeffs({"1", "3", "3", "1"}), Expression::parse("30*exp(-x)"), 0.0, hi},
                 {{0, 0.0, 3.0}, {1, 0.0, -3.0}, {2, 0.0, -47.0}},
                 Expression::parse("(3 - 25*x^2 + 5*x^3)*exp(-x)"),
                 n,
                 ls};
  return tp;
}

TestProblem problem_c(std::size_t n, int ls, double hi, std::string name, std::string desc) {
  return TestProblem{std::move(name), std::move(desc),
                     OdeSpec{2, coeffs({"-2", "-x", "2*x^2"}), Expression::parse("0"), 1.0, hi},
                     {{0, 1.0, 5.0}, {1, 1.0, 0.0}},
                     Expression::parse("x^2 + 4/sqrt(x)"),
                     n,
                     ls};
}

TestProblem problem_e(std::vector<Constraint> cons, const std::vector<double>& base, double hi,
                      std::size_t n, int ls, std::string name, std::string desc) {
  const std::vector<double> poly = constrained_polynomial(base, cons);
  return TestProblem{std::move(name), std::move(desc),
                     OdeSpec{1, coeffs({"0", "1"}), polynomial_expression(poly, 1), 0.0, hi},
                     std::move(cons),
                     polynomial_expression(poly, 0),
                     n,
                     ls};
}

}  // namespace

std::vector<std::string> test_problem_names() {
  return {"testA", "testB", "testC", "testE", "testA_pil", "testC_pil", "testE_pil"};
}

TestProblem test_problem(const std::string& name) {
  if (name == "testA") {
    return problem_a(77, 9, 8.0, name, "y''' + 3y'' + 3y' + y = 30 exp(-x), initial values at 0");
  }
  if (name == "testB") {
    return problem_a(20, 9, 8.0, name, "testA on 20 evenly spaced nodes");
  }
  if (name == "testA_pil") {
    return problem_a(10, 5, 0.1, name, "testA on 10 nodes over [0, 0.1]");
  }
  if (name == "testC") {
    return problem_c(69, 15, 10.0, name, "2x^2 y'' - x y' - 2y = 0, initial values at 1");
  }
  if (name == "testC_pil") {
    return problem_c(10, 5, 2.0, name, "testC on 10 nodes over [1, 2]");
  }
  if (name == "testE") {
    return problem_e({{0, 0.7895, 0.0}, {0, 1.0, -0.1}, {1, 0.0, 1.0}, {1, 1.0, 0.0}},
                     test_e_printed_coefficients(), 1.0, 21, 9, name,
                     "y' = g with two Dirichlet and two Neumann constraints at 3 locations");
  }
  if (name == "testE_pil") {
    // degree-8 completion of the quartic 1.1x^4 + 0.4x^3 + 0.5x^2 - 1.2x - 0.3
    return problem_e({{0, 0.0556, 0.0}, {0, 0.1, -0.1}, {1, 0.0, 1.0}, {1, 0.1, 0.0}},
                     {0, 0, 0, 0, 1.1, 0.4, 0.5, -1.2, -0.3}, 0.1, 10, 5, name,
                     "testE rescaled to 10 nodes over [0, 0.1]");
  }
  throw Error(ErrorCode::InvalidArgument, "unknown test problem '" + name + "'");
}

// ---------------------------------------------------------------------------

TestReport run_test_problem(const TestProblem& tp, std::size_t n, int support,
                            DerivativeScheme scheme, const std::optional<NodeGrid>& grid_in,
                            int timing_repeats) {
  const NodeGrid grid = grid_in ? *grid_in : NodeGrid::uniform(n, tp.spec.lo, tp.spec.hi);

  const auto t0 = Clock::now();
  const LinearOperator L = assemble_operator(tp.spec, grid, support, scheme);
  const ConstraintSet cs = compile_constraints(grid, tp.constraints, support, scheme);
  const WellPosedReport wp = check_well_posed(L, cs);
  const PreparedSolver ps = prepare(L, cs);
  const double prep = seconds_since(t0);

  const Vector g = eval_vector(*tp.spec.forcing, grid);
  TestReport rep;
  rep.problem = tp.name;
  rep.n = grid.size();
  rep.support = support;
  rep.scheme = scheme;
  rep.nodes.assign(grid.nodes().begin(), grid.nodes().end());
  rep.y = solve(ps, g);
  rep.y_analytic = eval_vector(tp.solution, grid);
  rep.error = rep.y - rep.y_analytic;
  rep.error_2norm = rep.error.norm();
  rep.relative_error = rep.error_2norm / rep.y_analytic.norm();
  rep.max_abs_error = rep.error.cwiseAbs().maxCoeff();
  rep.prepare_seconds = prep;
  rep.well_posed = wp.well_posed;

  if (timing_repeats > 0) {
    Vector y(static_cast<Eigen::Index>(grid.size()));
    const std::span<const double> gs(g.data(), grid.size());
    const std::span<double> ys(y.data(), grid.size());
    const auto t1 = Clock::now();
    for (int r = 0; r < timing_repeats; ++r) solve_into(ps, gs, ys);
    rep.solve_seconds = seconds_since(t1) / timing_repeats;
  }
  return rep;
}

BaselineReport run_rk45_baseline(const TestProblem& tp, double rtol, double atol) {
  const FirstOrderSystem sys = companion_system(tp.spec, tp.constraints);
  const auto t0 = Clock::now();
  const Rk45Result rk = rk45_solve(sys, tp.spec.lo, tp.spec.hi, rtol, atol);
  BaselineReport rep;
  rep.seconds = seconds_since(t0);
  rep.nodes = rk.nodes;
  double ss = 0.0;
  for (std::size_t i = 0; i < rk.nodes.size(); ++i) {
    const double e = rk.states[i][0] - tp.solution.evaluate(rk.nodes[i]);
    ss += e * e;
  }
  rep.error_2norm = std::sqrt(ss);
  return rep;
}

std::vector<SweepPoint> support_sweep(const TestProblem& tp, std::size_t n,
                                      const std::vector<int>& supports,
                                      DerivativeScheme scheme) {
  const NodeGrid grid = NodeGrid::uniform(n, tp.spec.lo, tp.spec.hi);
  for (int ls : supports) validate_support(grid, tp.spec.order, ls);
  std::vector<SweepPoint> out;
  out.reserve(supports.size());
  for (int ls : supports) {
    try {
      const TestReport rep = run_test_problem(tp, n, ls, scheme, grid, 0);
      out.push_back({ls, rep.relative_error, ""});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Underconstrained) throw;
      out.push_back({ls, std::numeric_limits<double>::infinity(), e.what()});
    }
  }
  return out;
}

int sweep_argmin(const std::vector<SweepPoint>& sweep) {
  if (sweep.empty()) throw Error(ErrorCode::InvalidArgument, "empty sweep");
  return std::min_element(sweep.begin(), sweep.end(),
                          [](const SweepPoint& a, const SweepPoint& b) {
                            return a.relative_error < b.relative_error;
                          })
      ->support;
}

double default_noise_sigma(const TestProblem& tp, const NodeGrid& grid) {
  return 0.01 * eval_vector(*tp.spec.forcing, grid).cwiseAbs().maxCoeff();
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

MonteCarloResult monte_carlo(const TestProblem& tp, std::size_t n, int support, double sigma,
                             std::size_t k, std::uint64_t seed, DerivativeScheme scheme) {
  if (k < 100) throw Error(ErrorCode::InvalidArgument, "Monte Carlo needs k >= 100");
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");

  const NodeGrid grid = NodeGrid::uniform(n, tp.spec.lo, tp.spec.hi);
  const LinearOperator L = assemble_operator(tp.spec, grid, support, scheme);
  const ConstraintSet cs = compile_constraints(grid, tp.constraints, support, scheme);
  const PreparedSolver ps = prepare(L, cs);
  const Vector g = eval_vector(*tp.spec.forcing, grid);

  MonteCarloResult res;
  res.y_analytic = eval_vector(tp.solution, grid);
  res.predicted_sigma = propagate_covariance(ps, sigma);
  res.sigma_g = sigma;
  res.iterations = k;
  res.seed = seed;

  const auto ni = static_cast<Eigen::Index>(n);
  Vector mean = Vector::Zero(ni);
  Vector m2 = Vector::Zero(ni);
  std::size_t count = 0;

  constexpr std::size_t kBlock = 1024;
  RowMatrix block(static_cast<Eigen::Index>(kBlock), ni);
  for (std::size_t first = 0; first < k; first += kBlock) {
    const auto rows = static_cast<std::ptrdiff_t>(std::min(kBlock, k - first));
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      std::mt19937_64 rng(splitmix64(seed ^ splitmix64(first + static_cast<std::size_t>(r))));
      std::normal_distribution<double> noise(0.0, 1.0);
      Vector gp(ni);
      for (Eigen::Index i = 0; i < ni; ++i) gp[i] = g[i] + sigma * noise(rng);
      double* out = block.row(r).data();
      kernels::affine_matvec_serial({ps.M().data(), static_cast<std::size_t>(ps.M().size())},
                                    {gp.data(), n}, {ps.y_h().data(), n}, {out, n});
    }
    // Welford, strictly in iteration order
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      ++count;
      const Vector y = block.row(r).transpose();
      const Vector delta = y - mean;
      mean += delta / static_cast<double>(count);
      m2 += delta.cwiseProduct(y - mean);
    }
  }
  res.mean = mean;
  res.bias = mean - res.y_analytic;
  res.sample_sigma = (m2 / static_cast<double>(count - 1)).cwiseSqrt();
  return res;
}

}  // namespace rtinv::reference
