#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rtinv/grid.hpp"
#include "rtinv/local_weights.hpp"
#include "rtinv/ode_operator.hpp"
#include "rtinv/types.hpp"

namespace rtinv {

/// y^(order)(location) = value.
struct Constraint {
  int order = 0;
  double location = 0.0;
  double value = 0.0;
};

/// Compiled form C^T y = d: one column of C per constraint.
struct ConstraintSet {
  std::vector<Constraint> constraints;
  Matrix C;  // n x p
  Vector d;  // p
  int support = 3;
  DerivativeScheme scheme = DerivativeScheme::Composed;

  std::size_t count() const noexcept { return constraints.size(); }
  std::uint64_t digest() const;
};

/// Stencil row realizing y^(order)(x) as a linear functional of the nodal
/// values. At a node the row uses that node's differentiation-matrix window;
/// elsewhere the `support` nearest nodes.
Vector constraint_row(const NodeGrid& grid, int order, double x, int support,
                      DerivativeScheme scheme);

/// Throws ConstraintOutOfRange, DependentConstraints (rank-deficient C with
/// consistent values) or InconsistentConstraints (d outside range(C^T)).
ConstraintSet compile_constraints(const NodeGrid& grid,
                                  const std::vector<Constraint>& constraints,
                                  int support,
                                  DerivativeScheme scheme = DerivativeScheme::Composed);

/// Null-space parameterization y = H d + F beta of { y : C^T y = d }.
struct ConstraintBasis {
  Matrix P;  // (C^T)^+, n x p
  Matrix F;  // orthonormal basis of null(C^T), n x (n-p)
  Matrix R;  // (n-p) x p
  Matrix H;  // P + F R
  std::uint64_t constraint_digest = 0;
};

ConstraintBasis compute_basis(const ConstraintSet& cs,
                              const std::optional<Matrix>& R = std::nullopt);

/// max(rows, cols) * eps * sigma_max.
double rank_tolerance(Eigen::Index rows, Eigen::Index cols, double sigma_max);

/// Numerical rank of `a` under rank_tolerance, or under `tol` when positive.
Eigen::Index numerical_rank(const Vector& singular_values, Eigen::Index rows,
                            Eigen::Index cols, double tol = 0.0);

struct WellPosedReport {
  Eigen::Index n = 0;
  Eigen::Index rank = 0;  // rank of [L; C^T]
  Vector singular_values;  // of [L; C^T], descending
  double tolerance = 0.0;
  bool well_posed = false;
  Eigen::Index rank_deficiency = 0;  // n - rank
  Eigen::Index null_lf_dimension = 0;  // dim null(L F)
  double smallest_lf_singular_value = 0.0;
};

/// Diagnoses rank [L; C^T] = n. `tol` <= 0 selects the default rank rule.
WellPosedReport check_well_posed(const LinearOperator& L, const ConstraintSet& cs,
                                 double tol = 0.0);

}  // namespace rtinv
