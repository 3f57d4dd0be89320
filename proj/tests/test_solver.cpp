#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "rtinv/errors.hpp"
#include "rtinv/kernels.hpp"
#include "rtinv/reference.hpp"
#include "rtinv/solver.hpp"

#include "helpers.hpp"

using namespace rtinv;

namespace {

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using LVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

// argmin ||L y - g|| subject to C^T y = d from the KKT system, in long double
Vector kkt_oracle(const Matrix& L, const Matrix& C, const Vector& d, const Vector& g) {
  const Eigen::Index n = L.rows(), p = C.cols();
  const LMatrix Ll = L.cast<long double>();
  LMatrix K = LMatrix::Zero(n + p, n + p);
  K.topLeftCorner(n, n) = Ll.transpose() * Ll;
  K.topRightCorner(n, p) = C.cast<long double>();
  K.bottomLeftCorner(p, n) = C.transpose().cast<long double>();
  LVector rhs(n + p);
  rhs.head(n) = Ll.transpose() * g.cast<long double>();
  rhs.tail(p) = d.cast<long double>();
  const LVector sol = K.fullPivLu().solve(rhs);
  return sol.head(n).cast<double>();
}

OdeSpec ode(int order, std::vector<std::string> coeffs, double lo, double hi,
            const std::string& forcing = "") {
  OdeSpec s;
  s.order = order;
  for (const auto& c : coeffs) s.coefficients.push_back(Expression::parse(c));
  if (!forcing.empty()) s.forcing = Expression::parse(forcing);
  s.lo = lo;
  s.hi = hi;
  return s;
}

PreparedSolver prepared_for(const std::string& name, bool keep_n = false) {
  const auto tp = reference::test_problem(name);
  const NodeGrid g = NodeGrid::uniform(tp.default_n, tp.spec.lo, tp.spec.hi);
  const LinearOperator L = assemble_operator(tp.spec, g, tp.default_support);
  PrepareOptions opts;
  opts.keep_homogeneous_map = keep_n;
  return prepare(L, compile_constraints(g, tp.constraints, tp.default_support), opts);
}

PreparedSolver synthetic_identity(std::size_t n) {
  const NodeGrid g = NodeGrid::uniform(n, 0.0, 1.0);
  return PreparedSolver(g, RowMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)),
                        Vector::Zero(static_cast<Eigen::Index>(n)),
                        Vector::Ones(static_cast<Eigen::Index>(n)), SolverMeta{});
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("y' = g with y(0) = c and g = 0 gives the constant c") {
    const NodeGrid g({0.0, 0.5, 1.0});
    const LinearOperator L = assemble_operator(ode(1, {"0", "1"}, 0.0, 1.0), g, 3);
    const PreparedSolver ps = prepare(L, compile_constraints(g, {{0, 0.0, 2.5}}, 3));
    const Vector y = solve(ps, Vector::Zero(3));
    CHECK((y - Vector::Constant(3, 2.5)).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(y == ps.y_h());
  }

  TEST_CASE("Test A and Test C accuracy") {
    const auto a = reference::test_problem("testA");
    const auto ra = reference::run_test_problem(a, 77, 9);
    CHECK(ra.error_2norm <= 1e-6);
    const auto c = reference::test_problem("testC");
    const auto rc = reference::run_test_problem(c, 69, 15);
    CHECK(rc.relative_error <= 1e-5);
  }

  TEST_CASE("prepared quantities re-derive") {
    const auto tp = reference::test_problem("testE");
    const NodeGrid g = NodeGrid::uniform(21, 0.0, 1.0);
    const LinearOperator L = assemble_operator(tp.spec, g, 9);
    const ConstraintSet cs = compile_constraints(g, tp.constraints, 9);
    const ConstraintBasis b = compute_basis(cs);
    const PreparedSolver ps = prepare(L, cs, {true});
    const Matrix LF = L.entries * b.F;
    const Matrix Mref = b.F * LF.completeOrthogonalDecomposition().pseudoInverse();
    CHECK((Matrix(ps.M()) - Mref).cwiseAbs().maxCoeff() <= 1e-10 * Mref.cwiseAbs().maxCoeff());
    const Vector yh = b.H * cs.d - Mref * (L.entries * (b.H * cs.d));
    CHECK((ps.y_h() - yh).norm() <= 1e-10 * yh.norm());
    for (Eigen::Index i = 0; i < ps.s().size(); ++i) {
      CHECK(ps.s()[i] >= 0.0);
      CHECK(ps.s()[i] == doctest::Approx(ps.M().row(i).norm()).epsilon(1e-14));
    }
    REQUIRE(ps.N());
    CHECK(((*ps.N()) * cs.d - ps.y_h()).norm() <= 1e-12 * ps.y_h().norm());
    CHECK(ps.meta().constraint_count == 4);
    CHECK(ps.meta().operator_digest == L.digest());
    CHECK(ps.meta().constraint_digest == cs.digest());
  }

  TEST_CASE("least-squares oracle on random systems") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    while (checked < 20) {
      const std::size_t n = 6 + rng() % 10;
      const int m = 1 + static_cast<int>(rng() % 2);
      const NodeGrid g = NodeGrid::uniform(n, 0.0, 1.0 + u(rng));
      std::vector<std::string> coeffs;
      for (int i = 0; i < m; ++i) coeffs.push_back(std::to_string(u(rng) - 0.5) + "*x");
      coeffs.push_back("1 + " + std::to_string(u(rng)) + "*x^2");
      const int ls = 2 * m + 1;
      const LinearOperator L = assemble_operator(ode(m, coeffs, g.lo(), g.hi()), g, ls);
      std::vector<Constraint> cons;
      const int p = m + static_cast<int>(rng() % 2);
      for (int k = 0; k < p; ++k) cons.push_back({k % m, g.lo() + (g.hi() - g.lo()) * u(rng), u(rng)});
      ConstraintSet cs;
      try {
        cs = compile_constraints(g, cons, ls);
      } catch (const Error&) {
        continue;
      }
      if (!check_well_posed(L, cs).well_posed) continue;
      const PreparedSolver ps = prepare(L, cs);
      const Vector gv = Vector::Random(static_cast<Eigen::Index>(n));
      const Vector want = kkt_oracle(L.entries, cs.C, cs.d, gv);
      CHECK(testutil::rel_diff(solve(ps, gv), want) <= 1e-7);
      ++checked;
    }
  }

  TEST_CASE("superposition and constraint satisfaction") {
    const PreparedSolver ps = prepared_for("testA");
    const auto tp = reference::test_problem("testA");
    const ConstraintSet cs = compile_constraints(ps.grid(), tp.constraints, 9);
    const auto n = static_cast<Eigen::Index>(ps.n());
    const Vector g1 = Vector::Random(n), g2 = Vector::Random(n);
    const Vector lhs = solve(ps, Vector(2.0 * g1 - 3.0 * g2)) - ps.y_h();
    const Vector rhs = 2.0 * (solve(ps, g1) - ps.y_h()) - 3.0 * (solve(ps, g2) - ps.y_h());
    CHECK((lhs - rhs).norm() <= 1e-12 * std::max(1.0, rhs.norm()));
    for (int k = 0; k < 20; ++k) {
      const Vector y = solve(ps, Vector(Vector::Random(n) * 10.0));
      CHECK((cs.C.transpose() * y - cs.d).norm() <= 1e-8 * cs.d.norm());
    }
  }

  TEST_CASE("trivial solves") {
    const PreparedSolver ps = prepared_for("testE");
    CHECK(solve(ps, Vector::Zero(21)) == ps.y_h());
    const PreparedSolver id = synthetic_identity(5);
    const Vector g = Vector::LinSpaced(5, -1.0, 3.0);
    CHECK(solve(id, g) == g);
  }

  TEST_CASE("FLOP counts") {
    for (std::size_t n : {10u, 21u, 50u}) {
      const PreparedSolver ps = synthetic_identity(n);
      kernels::FlopCount count;
      const Vector g = Vector::Ones(static_cast<Eigen::Index>(n));
      const Vector y = solve_counted(ps, {g.data(), n}, count);
      CHECK(count.total() == 2 * n * n);
      CHECK(count.multiplies == n * n);
      CHECK(y == solve(ps, g));
    }
    kernels::FlopCount c21;
    const PreparedSolver e = prepared_for("testE");
    const Vector g = Vector::Ones(21);
    (void)solve_counted(e, {g.data(), 21}, c21);
    CHECK(c21.total() == 882);
  }

  TEST_CASE("input validation") {
    const PreparedSolver ps = prepared_for("testE");
    try {
      (void)solve(ps, Vector::Zero(20));
      FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
    Vector bad = Vector::Zero(21);
    bad[3] = NAN;
    try {
      (void)solve(ps, bad);
      FAIL("expected InvalidMeasurement");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidMeasurement);
    }
  }

  TEST_CASE("uncertainty propagation") {
    const PreparedSolver ps = prepared_for("testE");
    CHECK(propagate_covariance(ps, 0.0) == Vector::Zero(21));
    CHECK(propagate_covariance(synthetic_identity(4), 0.3) == Vector::Constant(4, 0.3));
    CHECK_THROWS_AS((void)propagate_covariance(ps, -1.0), Error);
    const Vector full = propagate_full_covariance(ps, 0.04 * Matrix::Identity(21, 21));
    CHECK((full - propagate_covariance(ps, 0.2)).cwiseAbs().maxCoeff() <= 1e-15);
  }

  TEST_CASE("confidence interval multipliers") {
    const Vector one = Vector::Ones(1);
    CHECK(confidence_interval(one, 100000, 0.683)[0] == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(confidence_interval(one, 1, 0.95)[0] == doctest::Approx(12.706).epsilon(1e-4));
    CHECK(confidence_interval(one, 30, 0.95)[0] == doctest::Approx(2.042).epsilon(1e-3));
    CHECK_THROWS_AS((void)confidence_interval(one, 0, 0.95), Error);
    CHECK_THROWS_AS((void)confidence_interval(one, 5, 1.0), Error);
  }

  TEST_CASE("residual diagnostics") {
    const auto tp = reference::test_problem("testE");
    const NodeGrid g = NodeGrid::uniform(21, 0.0, 1.0);
    const LinearOperator L = assemble_operator(tp.spec, g, 9);
    const PreparedSolver ps = prepare(L, compile_constraints(g, tp.constraints, 9));
    const Vector gv = eval_vector(*tp.spec.forcing, g);
    const Vector r = residual(ps, L, {gv.data(), 21});
    CHECK(r.cwiseAbs().maxCoeff() <= 1e-9 * gv.cwiseAbs().maxCoeff());

    // with noise the residual is the projection of the noise onto a
    // p-dimensional complement of range(L F): E||r||^2 = p sigma^2
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 0.01);
    double acc = 0.0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
      Vector gn = gv;
      for (Eigen::Index i = 0; i < 21; ++i) gn[i] += noise(rng);
      acc += residual(ps, L, {gn.data(), 21}).squaredNorm();
    }
    CHECK(acc / trials == doctest::Approx(4 * 1e-4).epsilon(0.1));

    const LinearOperator other = assemble_operator(tp.spec, g, 7);
    try {
      (void)residual(ps, other, {gv.data(), 21});
      FAIL("expected StaleOperator");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::StaleOperator);
    }

    const Solution sol = solve_with_diagnostics(ps, {gv.data(), 21}, 0.01, &L);
    REQUIRE(sol.residual);
    CHECK(sol.y == solve(ps, gv));
    CHECK(sol.sigma_y == propagate_covariance(ps, 0.01));
    const Solution bare = solve_with_diagnostics(ps, {gv.data(), 21}, 0.01);
    CHECK_FALSE(bare.residual);
    CHECK_FALSE(bare.ks_gaussian);
  }

  TEST_CASE("underconstrained systems are rejected") {
    const NodeGrid g = NodeGrid::uniform(20, 0.0, 1.0);
    const auto expect_underconstrained = [&](const LinearOperator& L, const std::vector<Constraint>& cons) {
      try {
        (void)prepare(L, compile_constraints(g, cons, 5));
        FAIL("expected Underconstrained");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Underconstrained);
      }
    };
    expect_underconstrained(assemble_operator(ode(1, {"0", "1"}, 0.0, 1.0), g, 5), {});
    expect_underconstrained(assemble_operator(ode(2, {"0", "0", "1"}, 0.0, 1.0), g, 5), {{0, 0.0, 1.0}});
    CHECK_NOTHROW((void)prepare(assemble_operator(ode(2, {"0", "0", "1"}, 0.0, 1.0), g, 5),
                                compile_constraints(g, {{0, 0.0, 1.0}, {1, 0.0, 0.0}}, 5)));
  }

  TEST_CASE("new constraint values through the homogeneous map") {
    const auto tp = reference::test_problem("testA");
    const NodeGrid g = NodeGrid::uniform(40, 0.0, 8.0);
    const LinearOperator L = assemble_operator(tp.spec, g, 9);
    const PreparedSolver ps = prepare(L, compile_constraints(g, tp.constraints, 9), {true});
    std::vector<Constraint> moved = tp.constraints;
    moved[0].value = 1.0;
    moved[2].value = 5.0;
    const PreparedSolver direct = prepare(L, compile_constraints(g, moved, 9));
    const PreparedSolver rebound = ps.with_constraint_values(Eigen::Vector3d(1.0, -3.0, 5.0));
    CHECK((rebound.y_h() - direct.y_h()).norm() <= 1e-9 * direct.y_h().norm());
    CHECK(rebound.meta().constraints[2].value == 5.0);
    CHECK(Matrix(rebound.M()) == Matrix(ps.M()));
    const PreparedSolver plain = prepare(L, compile_constraints(g, tp.constraints, 9));
    CHECK_THROWS_AS((void)plain.with_constraint_values(Eigen::Vector3d::Zero()), Error);
  }

  TEST_CASE("content digest binds the arrays") {
    const PreparedSolver a = prepared_for("testE");
    const PreparedSolver b = prepared_for("testE");
    CHECK(a.content_digest() == b.content_digest());
    RowMatrix M = a.M();
    M(3, 4) += 1e-12;
    const PreparedSolver c(a.grid(), M, a.y_h(), a.s(), a.meta());
    CHECK(c.content_digest() != a.content_digest());
    CHECK(a.runtime_footprint_bytes() == 8 * (21 * 21 + 2 * 21));
  }
}

TEST_SUITE("kernels") {
  TEST_CASE("serial, counted and OpenMP kernels agree bitwise") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    for (std::size_t n : {1u, 2u, 7u, 21u, 127u, 128u, 300u}) {
      std::vector<double> M(n * n), g(n), off(n), y1(n), y2(n), y3(n);
      for (auto& v : M) v = nd(rng);
      for (auto& v : g) v = nd(rng);
      for (auto& v : off) v = 100.0 * nd(rng);
      kernels::affine_matvec_serial(M, g, off, y1);
      kernels::FlopCount c;
      kernels::affine_matvec_counted(M, g, off, y2, c);
      kernels::affine_matvec_omp(M, g, off, y3);
      CHECK(y1 == y2);
      CHECK(y1 == y3);
      CHECK(c.total() == 2 * n * n);
    }
  }

  TEST_CASE("accumulation order is row-major left to right, offset last") {
    const std::vector<double> M = {1e16, 1.0, -1e16, 0.0};
    const std::vector<double> g = {1.0, 1.0};
    const std::vector<double> off = {0.5, 0.0};
    std::vector<double> y(2);
    kernels::affine_matvec_serial(M, g, off, y);
    // (1e16 + 1) rounds to 1e16, then + 0.5 rounds back
    CHECK(y[0] == 1e16);
    CHECK(y[1] == -1e16);
  }

  TEST_CASE("solve_into allocates nothing and matches solve") {
    const PreparedSolver ps = prepared_for("testA");
    const Vector g = Vector::Random(77);
    std::vector<double> out(77);
    solve_into(ps, {g.data(), 77}, out);
    const Vector y = solve(ps, g);
    for (Eigen::Index i = 0; i < 77; ++i) CHECK(out[static_cast<std::size_t>(i)] == y[i]);
  }
}
