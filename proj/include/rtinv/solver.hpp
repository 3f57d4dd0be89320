#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "rtinv/constraints.hpp"
#include "rtinv/grid.hpp"
#include "rtinv/kernels.hpp"
#include "rtinv/ode_operator.hpp"
#include "rtinv/types.hpp"

namespace rtinv {

struct SolverMeta {
  int ode_order = 0;
  int support = 0;
  int constraint_count = 0;
  DerivativeScheme scheme = DerivativeScheme::Composed;
  std::uint64_t operator_digest = 0;
  std::uint64_t constraint_digest = 0;
  double rank_tolerance = 0.0;
  double smallest_lf_singular_value = 0.0;
  std::vector<Constraint> constraints;
};

/// Offline-computed run-time artifact: y = M g + y_h, sigma_y = sigma_g s.
/// Deeply immutable; concurrent solves on one instance are safe.
class PreparedSolver {
 public:
  PreparedSolver(NodeGrid grid, RowMatrix M, Vector y_h, Vector s, SolverMeta meta,
                 std::optional<Matrix> N = std::nullopt);

  std::size_t n() const noexcept { return grid_.size(); }
  const NodeGrid& grid() const noexcept { return grid_; }
  const RowMatrix& M() const noexcept { return M_; }
  const Vector& y_h() const noexcept { return y_h_; }
  const Vector& s() const noexcept { return s_; }
  const SolverMeta& meta() const noexcept { return meta_; }
  /// (I - M L) H, kept only when requested at prepare time.
  const std::optional<Matrix>& N() const noexcept { return N_; }

  /// Binds M, y_h and s to the operator/constraint digests.
  std::uint64_t content_digest() const;

  /// Bytes the run-time solve touches: M, y_h and one output vector.
  std::size_t runtime_footprint_bytes() const noexcept {
    return sizeof(double) * (n() * n() + 2 * n());
  }

  /// Same M with y_h recomputed as N d; requires N.
  PreparedSolver with_constraint_values(const Vector& d) const;

 private:
  NodeGrid grid_;
  RowMatrix M_;
  Vector y_h_;
  Vector s_;
  SolverMeta meta_;
  std::optional<Matrix> N_;
};

struct PrepareOptions {
  bool keep_homogeneous_map = false;
};

/// M = F (L F)^+, y_h = (I - M L) H d. Throws Underconstrained when
/// null(L F) is nonempty.
PreparedSolver prepare(const LinearOperator& L, const ConstraintBasis& basis,
                       const Vector& d, const PrepareOptions& options = {});

/// Convenience: compile, factor and prepare in one call.
PreparedSolver prepare(const LinearOperator& L, const ConstraintSet& cs,
                       const PrepareOptions& options = {});

/// Allocation-free run-time solve into `y` (length n).
void solve_into(const PreparedSolver& ps, std::span<const double> g, std::span<double> y);
Vector solve(const PreparedSolver& ps, std::span<const double> g);
Vector solve(const PreparedSolver& ps, const Vector& g);
/// Serial solve with every multiply and add counted.
Vector solve_counted(const PreparedSolver& ps, std::span<const double> g,
                     kernels::FlopCount& count);

/// sigma_g * s; O(n).
Vector propagate_covariance(const PreparedSolver& ps, double sigma_g);

/// sqrt(diag(M cov_g M^T)) for a general input covariance. Offline only.
Vector propagate_full_covariance(const PreparedSolver& ps, const Matrix& cov_g);

/// g - L (M g + y_h). Throws StaleOperator if L is not the operator ps was
/// prepared from.
Vector residual(const PreparedSolver& ps, const LinearOperator& L, std::span<const double> g);

/// t^{-1}((1 + level)/2, dof) * sigma_y, elementwise.
Vector confidence_interval(const Vector& sigma_y, int dof, double level);

struct Solution {
  Vector y;
  Vector sigma_y;
  std::optional<Vector> residual;
  std::optional<double> ks_statistic;
  std::optional<bool> ks_gaussian;
};

/// Solve plus diagnostics. Residual and KS verdict need the operator.
Solution solve_with_diagnostics(const PreparedSolver& ps, std::span<const double> g,
                                double sigma_g, const LinearOperator* L = nullptr,
                                double alpha = 0.05);

}  // namespace rtinv
