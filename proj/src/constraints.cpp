#include "rtinv/constraints.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "rtinv/digest.hpp"
#include "rtinv/errors.hpp"

namespace rtinv {
namespace {

Vector stencil_row(const NodeGrid& grid, int order, double x, int support) {
  const auto ls = static_cast<std::size_t>(support);
  const std::size_t node = grid.find_node(x);
  const bool on_node = node < grid.size();
  const std::size_t start = on_node ? grid.row_window(node, ls) : grid.nearest_window(x, ls);
  const double at = on_node ? grid[node] : x;
  const StencilWeights w = fd_weights(grid.nodes().subspan(start, ls), at, order);
  Vector row = Vector::Zero(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t j = 0; j < ls; ++j) {
    row[static_cast<Eigen::Index>(start + j)] = w.weights_by_order[static_cast<std::size_t>(order)][j];
  }
  return row;
}

Vector row_with(const NodeGrid& grid, int order, double x, int support,
                DerivativeScheme scheme, const Matrix* d1) {
  if (order <= 1 || scheme == DerivativeScheme::Direct) {
    return stencil_row(grid, order, x, support);
  }
  // composed: first-derivative functional followed by D_1^(order-1)
  Matrix local;
  if (d1 == nullptr) {
    local = build_diff_matrix(grid, 1, support).entries;
    d1 = &local;
  }
  Eigen::RowVectorXd r = stencil_row(grid, 1, x, support).transpose();
  for (int i = 1; i < order; ++i) r = r * (*d1);
  return r.transpose();
}

void check_constraint(const NodeGrid& grid, const Constraint& c, int support,
                      std::size_t index) {
  if (!std::isfinite(c.location) || !std::isfinite(c.value)) {
    throw Error(ErrorCode::InvalidArgument, "non-finite constraint", index);
  }
  const double slack = 1e-12 * std::max(1.0, grid.hi() - grid.lo());
  if (c.location < grid.lo() - slack || c.location > grid.hi() + slack) {
    throw Error(ErrorCode::ConstraintOutOfRange,
                "constraint " + std::to_string(index) + " at x = " +
                    std::to_string(c.location) + " lies outside the grid span",
                index);
  }
  if (c.order < 0 || c.order >= support) {
    throw Error(ErrorCode::InsufficientSupport,
                "constraint " + std::to_string(index) + " has derivative order " +
                    std::to_string(c.order) + " >= support length",
                index);
  }
}

}  // namespace

double rank_tolerance(Eigen::Index rows, Eigen::Index cols, double sigma_max) {
  return static_cast<double>(std::max(rows, cols)) *
         std::numeric_limits<double>::epsilon() * sigma_max;
}

Eigen::Index numerical_rank(const Vector& sv, Eigen::Index rows, Eigen::Index cols,
                            double tol) {
  if (sv.size() == 0) return 0;
  const double t = tol > 0.0 ? tol : rank_tolerance(rows, cols, sv.maxCoeff());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) r += sv[i] > t ? 1 : 0;
  return r;
}

std::uint64_t ConstraintSet::digest() const {
  Fnv1a h;
  h.add(C);
  h.add(d);
  return h.value();
}

Vector constraint_row(const NodeGrid& grid, int order, double x, int support,
                      DerivativeScheme scheme) {
  validate_support(grid, 0, support);
  check_constraint(grid, Constraint{order, x, 0.0}, support, 0);
  return row_with(grid, order, x, support, scheme, nullptr);
}

ConstraintSet compile_constraints(const NodeGrid& grid,
                                  const std::vector<Constraint>& constraints,
                                  int support, DerivativeScheme scheme) {
  validate_support(grid, 0, support);
  const auto n = static_cast<Eigen::Index>(grid.size());
  const auto p = static_cast<Eigen::Index>(constraints.size());

  bool need_d1 = false;
  for (std::size_t k = 0; k < constraints.size(); ++k) {
    check_constraint(grid, constraints[k], support, k);
    need_d1 = need_d1 || constraints[k].order > 1;
  }
  Matrix d1;
  if (need_d1 && scheme == DerivativeScheme::Composed) {
    d1 = build_diff_matrix(grid, 1, support).entries;
  }

  ConstraintSet cs{constraints, Matrix(n, p), Vector(p), support, scheme};
  for (Eigen::Index k = 0; k < p; ++k) {
    const Constraint& c = constraints[static_cast<std::size_t>(k)];
    cs.C.col(k) = row_with(grid, c.order, c.location, support, scheme,
                           d1.size() > 0 ? &d1 : nullptr);
    cs.d[k] = c.value;
  }
  if (p == 0) return cs;
  if (p > n) {
    throw Error(ErrorCode::DependentConstraints,
                std::to_string(p) + " constraints on " + std::to_string(n) + " nodes");
  }

  Eigen::BDCSVD<Matrix> svd(cs.C, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector sv = svd.singularValues();
  const Eigen::Index rank = numerical_rank(sv, n, p);
  if (rank < p) {
    // d in range(C^T)? Project onto the column space of C^T via the SVD.
    const double tol = rank_tolerance(n, p, sv.maxCoeff());
    Vector inv = Vector::Zero(p);
    for (Eigen::Index i = 0; i < p; ++i) inv[i] = sv[i] > tol ? 1.0 / sv[i] : 0.0;
    const Matrix& U = svd.matrixU();
    const Matrix& V = svd.matrixV();
    // C^T = V S U^T, (C^T)^+ = U S^+ V^T
    const Vector y = U * (inv.asDiagonal() * (V.transpose() * cs.d));
    const double resid = (cs.C.transpose() * y - cs.d).norm();
    if (resid > 1e-9 * std::max(1.0, cs.d.norm())) {
      throw Error(ErrorCode::InconsistentConstraints,
                  "constraint values are not in range(C^T) (residual " +
                      std::to_string(resid) + ")");
    }
    throw Error(ErrorCode::DependentConstraints,
                "rank(C) = " + std::to_string(rank) + " < " + std::to_string(p) +
                    " constraints");
  }
  return cs;
}

ConstraintBasis compute_basis(const ConstraintSet& cs, const std::optional<Matrix>& R) {
  const Eigen::Index n = cs.C.rows();
  const Eigen::Index p = cs.C.cols();
  ConstraintBasis b;
  b.constraint_digest = cs.digest();

  if (p == 0) {
    b.P = Matrix::Zero(n, 0);
    b.F = Matrix::Identity(n, n);
  } else {
    Eigen::BDCSVD<Matrix> svd(cs.C, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double tol = rank_tolerance(n, p, sv.maxCoeff());
    Vector inv(p);
    for (Eigen::Index i = 0; i < p; ++i) inv[i] = sv[i] > tol ? 1.0 / sv[i] : 0.0;
    b.P = svd.matrixU() * inv.asDiagonal() * svd.matrixV().transpose();

    Eigen::HouseholderQR<Matrix> qr(cs.C);
    const Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
    b.F = Q.rightCols(n - p);
  }

  if (R) {
    if (R->rows() != n - p || R->cols() != p) {
      throw Error(ErrorCode::DimensionMismatch, "R must be (n-p) x p");
    }
    b.R = *R;
  } else {
    b.R = Matrix::Zero(n - p, p);
  }
  b.H = b.P + b.F * b.R;
  return b;
}

WellPosedReport check_well_posed(const LinearOperator& L, const ConstraintSet& cs,
                                 double tol) {
  const Eigen::Index n = L.entries.rows();
  const Eigen::Index p = cs.C.cols();
  if (cs.C.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "operator and constraints differ in n");
  }
  WellPosedReport rep;
  rep.n = n;

  Matrix stacked(n + p, n);
  stacked.topRows(n) = L.entries;
  stacked.bottomRows(p) = cs.C.transpose();
  Eigen::BDCSVD<Matrix> svd(stacked);
  rep.singular_values = svd.singularValues();
  rep.tolerance = tol > 0.0 ? tol : rank_tolerance(n + p, n, rep.singular_values.maxCoeff());
  rep.rank = numerical_rank(rep.singular_values, n + p, n, rep.tolerance);
  rep.rank_deficiency = n - rep.rank;
  rep.well_posed = rep.rank == n;

  const ConstraintBasis basis = compute_basis(cs);
  const Matrix lf = L.entries * basis.F;
  if (lf.cols() > 0) {
    Eigen::BDCSVD<Matrix> lsvd(lf);
    const Vector& s = lsvd.singularValues();
    const double ltol = tol > 0.0 ? tol : rank_tolerance(lf.rows(), lf.cols(), s.maxCoeff());
    rep.null_lf_dimension = lf.cols() - numerical_rank(s, lf.rows(), lf.cols(), ltol);
    rep.smallest_lf_singular_value = s[s.size() - 1];
  }
  return rep;
}

}  // namespace rtinv
