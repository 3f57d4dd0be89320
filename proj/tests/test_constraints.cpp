#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "rtinv/constraints.hpp"
#include "rtinv/errors.hpp"
#include "rtinv/local_weights.hpp"
#include "rtinv/reference.hpp"

using namespace rtinv;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::InvalidArgument;
}

OdeSpec first_order() {
  OdeSpec s;
  s.order = 1;
  s.coefficients = {Expression::parse("0"), Expression::parse("1")};
  return s;
}

}  // namespace

TEST_SUITE("constraints") {
  TEST_CASE("value at the first node") {
    const NodeGrid g = NodeGrid::uniform(6, 0.0, 1.0);
    const ConstraintSet cs = compile_constraints(g, {{0, 0.0, 3.0}}, 3);
    Vector e1 = Vector::Zero(6);
    e1[0] = 1.0;
    CHECK(cs.C.col(0) == e1);
    CHECK(cs.d[0] == 3.0);
  }

  TEST_CASE("Test A constraint columns are end-point stencils") {
    const NodeGrid g = NodeGrid::uniform(77, 0.0, 8.0);
    const ConstraintSet cs = compile_constraints(g, {{0, 0.0, 3.0}, {1, 0.0, -3.0}, {2, 0.0, -47.0}}, 9);
    REQUIRE(cs.C.cols() == 3);
    Vector e1 = Vector::Zero(77);
    e1[0] = 1.0;
    CHECK(cs.C.col(0) == e1);
    const Matrix D1 = build_diff_matrix(g, 1, 9).entries;
    CHECK((cs.C.col(1) - D1.row(0).transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((cs.C.col(2) - (D1.row(0) * D1).transpose()).cwiseAbs().maxCoeff() <= 1e-12 * D1.squaredNorm());
    const ConstraintSet direct =
        compile_constraints(g, {{2, 0.0, -47.0}}, 9, DerivativeScheme::Direct);
    CHECK(direct.C.col(0) == build_diff_matrix(g, 2, 9).entries.row(0).transpose());
    CHECK(cs.d == Eigen::Vector3d(3.0, -3.0, -47.0));
  }

  TEST_CASE("off-node rows reproduce polynomials") {
    const NodeGrid g({0.0, 0.3, 0.5, 0.9, 1.4, 1.6, 2.0});
    for (auto scheme : {DerivativeScheme::Direct, DerivativeScheme::Composed}) {
      Vector y(7);
      for (Eigen::Index i = 0; i < 7; ++i) {
        const double x = g[static_cast<std::size_t>(i)];
        y[i] = 1.0 + x - 0.5 * x * x;
      }
      const double x0 = 0.77;
      CHECK(constraint_row(g, 0, x0, 5, scheme).dot(y) == doctest::Approx(1.0 + x0 - 0.5 * x0 * x0));
      CHECK(constraint_row(g, 1, x0, 5, scheme).dot(y) == doctest::Approx(1.0 - x0));
    }
  }

  TEST_CASE("dependent, inconsistent and out-of-range constraints") {
    const NodeGrid g = NodeGrid::uniform(10, 0.0, 1.0);
    CHECK(code_of([&] { (void)compile_constraints(g, {{0, 0.0, 3.0}, {0, 0.0, 3.0}}, 3); }) ==
          ErrorCode::DependentConstraints);
    CHECK(code_of([&] { (void)compile_constraints(g, {{0, 0.0, 1.0}, {0, 0.0, 2.0}}, 3); }) ==
          ErrorCode::InconsistentConstraints);
    CHECK(code_of([&] { (void)compile_constraints(g, {{0, 1.5, 0.0}}, 3); }) ==
          ErrorCode::ConstraintOutOfRange);
    CHECK(code_of([&] { (void)compile_constraints(g, {{3, 0.5, 0.0}}, 3); }) ==
          ErrorCode::InsufficientSupport);
    std::vector<Constraint> many;
    for (int i = 0; i < 11; ++i) many.push_back({0, 0.05 * i, 0.0});
    CHECK(code_of([&] { (void)compile_constraints(g, many, 3); }) == ErrorCode::DependentConstraints);
  }

  TEST_CASE("two-node basis") {
    const NodeGrid g({0.0, 1.0});
    const ConstraintSet cs = compile_constraints(g, {{0, 0.0, 1.0}}, 1);
    const ConstraintBasis b = compute_basis(cs);
    CHECK(b.P(0, 0) == doctest::Approx(1.0));
    CHECK(b.P(1, 0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(std::abs(b.F(0, 0)) <= 1e-15);
    CHECK(std::abs(b.F(1, 0)) == doctest::Approx(1.0));
    const Vector yc = b.H * cs.d;
    CHECK(yc[0] == doctest::Approx(1.0));
    CHECK(yc[1] == doctest::Approx(0.0).epsilon(1e-15));
  }

  TEST_CASE("basis identities on random constraint sets") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t n = 8 + rng() % 30;
      const NodeGrid g = NodeGrid::uniform(n, 0.0, 2.0);
      const int p = 1 + static_cast<int>(rng() % 4);
      std::vector<Constraint> cons;
      for (int k = 0; k < p; ++k) cons.push_back({k % 2, 2.0 * u(rng), 4.0 * u(rng) - 2.0});
      ConstraintSet cs;
      try {
        cs = compile_constraints(g, cons, 5);
      } catch (const Error&) {
        continue;  // rare near-duplicate draws
      }
      const ConstraintBasis b = compute_basis(cs);
      const auto np = static_cast<Eigen::Index>(n) - p;
      CHECK((b.F.transpose() * b.F - Matrix::Identity(np, np)).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((cs.C.transpose() * b.F).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, cs.C.norm()));
      CHECK((cs.C.transpose() * (b.H * cs.d) - cs.d).norm() <= 1e-10 * std::max(1.0, cs.d.norm()));
      const Matrix R = Matrix::Random(np, p);
      const ConstraintBasis br = compute_basis(cs, R);
      CHECK((cs.C.transpose() * (br.H * cs.d) - cs.d).norm() <= 1e-10 * std::max(1.0, cs.d.norm()));
    }
  }

  TEST_CASE("Test E constraints under three choices of R") {
    const auto tp = reference::test_problem("testE");
    const NodeGrid g = NodeGrid::uniform(tp.default_n, 0.0, 1.0);
    const ConstraintSet cs = compile_constraints(g, tp.constraints, tp.default_support);
    REQUIRE(cs.count() == 4);
    const Eigen::Index np = cs.C.rows() - 4;
    std::vector<Vector> sols;
    for (int k = 0; k < 3; ++k) {
      const Matrix R = k == 0 ? Matrix::Zero(np, 4) : Matrix(Matrix::Random(np, 4) * k);
      const Vector y = compute_basis(cs, R).H * cs.d;
      CHECK((cs.C.transpose() * y - cs.d).norm() <= 1e-10 * cs.d.norm());
      sols.push_back(y);
    }
    CHECK((sols[0] - sols[1]).norm() > 1e-3);
    CHECK((sols[1] - sols[2]).norm() > 1e-3);
    CHECK(code_of([&] { (void)compute_basis(cs, Matrix::Zero(np, 3)); }) == ErrorCode::DimensionMismatch);
  }

  TEST_CASE("well-posedness report") {
    const NodeGrid g = NodeGrid::uniform(20, 0.0, 1.0);
    OdeSpec s = first_order();
    const LinearOperator L = assemble_operator(s, g, 5);
    const ConstraintSet none = compile_constraints(g, {}, 5);
    const WellPosedReport r0 = check_well_posed(L, none);
    CHECK_FALSE(r0.well_posed);
    CHECK(r0.rank_deficiency == 1);
    CHECK(r0.null_lf_dimension == 1);

    const auto ta = reference::test_problem("testA");
    const NodeGrid ga = NodeGrid::uniform(77, 0.0, 8.0);
    const WellPosedReport ra = check_well_posed(assemble_operator(ta.spec, ga, 9),
                                                compile_constraints(ga, ta.constraints, 9));
    CHECK(ra.well_posed);
    CHECK(ra.rank == 77);
    CHECK(ra.null_lf_dimension == 0);

    const auto te = reference::test_problem("testE");
    const NodeGrid ge = NodeGrid::uniform(21, 0.0, 1.0);
    CHECK(check_well_posed(assemble_operator(te.spec, ge, 9), compile_constraints(ge, te.constraints, 9))
              .well_posed);
  }

  TEST_CASE("digest covers C and d") {
    const NodeGrid g = NodeGrid::uniform(10, 0.0, 1.0);
    const auto a = compile_constraints(g, {{0, 0.0, 1.0}}, 3);
    const auto b = compile_constraints(g, {{0, 0.0, 2.0}}, 3);
    const auto c = compile_constraints(g, {{1, 0.0, 1.0}}, 3);
    CHECK(a.digest() != b.digest());
    CHECK(a.digest() != c.digest());
    CHECK(a.digest() == compile_constraints(g, {{0, 0.0, 1.0}}, 3).digest());
  }
}
