#include "rtinv/solver.hpp"

#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "rtinv/digest.hpp"
#include "rtinv/errors.hpp"
#include "rtinv/stats.hpp"

namespace rtinv {

PreparedSolver::PreparedSolver(NodeGrid grid, RowMatrix M, Vector y_h, Vector s,
                               SolverMeta meta, std::optional<Matrix> N)
    : grid_(std::move(grid)),
      M_(std::move(M)),
      y_h_(std::move(y_h)),
      s_(std::move(s)),
      meta_(std::move(meta)),
      N_(std::move(N)) {
  const auto n = static_cast<Eigen::Index>(grid_.size());
  if (M_.rows() != n || M_.cols() != n || y_h_.size() != n || s_.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "artifact arrays do not match the grid");
  }
  if (N_ && N_->rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "N does not match the grid");
  }
}

std::uint64_t PreparedSolver::content_digest() const {
  Fnv1a h;
  h.add(grid_.nodes());
  h.add(std::span<const double>(M_.data(), static_cast<std::size_t>(M_.size())));
  h.add(y_h_);
  h.add(s_);
  h.add(static_cast<std::int64_t>(meta_.operator_digest));
  h.add(static_cast<std::int64_t>(meta_.constraint_digest));
  if (N_) h.add(*N_);
  return h.value();
}

PreparedSolver PreparedSolver::with_constraint_values(const Vector& d) const {
  if (!N_) {
    throw Error(ErrorCode::InvalidArgument,
                "artifact was prepared without the homogeneous map N");
  }
  if (d.size() != N_->cols()) {
    throw Error(ErrorCode::DimensionMismatch, "constraint value count differs from p");
  }
  SolverMeta meta = meta_;
  if (meta.constraints.size() == static_cast<std::size_t>(d.size())) {
    for (Eigen::Index k = 0; k < d.size(); ++k) {
      meta.constraints[static_cast<std::size_t>(k)].value = d[k];
    }
  }
  return PreparedSolver(grid_, M_, (*N_) * d, s_, std::move(meta), N_);
}

PreparedSolver prepare(const LinearOperator& L, const ConstraintBasis& basis,
                       const Vector& d, const PrepareOptions& options) {
  const Eigen::Index n = L.entries.rows();
  const Eigen::Index p = basis.P.cols();
  if (basis.F.rows() != n || d.size() != p) {
    throw Error(ErrorCode::DimensionMismatch, "operator, basis and d disagree in size");
  }

  const Matrix lf = L.entries * basis.F;
  Eigen::BDCSVD<Matrix> svd(lf, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const Eigen::Index k = sv.size();
  const double tol = k > 0 ? rank_tolerance(lf.rows(), lf.cols(), sv.maxCoeff()) : 0.0;
  const Eigen::Index rank = numerical_rank(sv, lf.rows(), lf.cols(), tol);
  if (rank < lf.cols()) {
    throw Error(ErrorCode::Underconstrained,
                "null(L F) has dimension " + std::to_string(lf.cols() - rank) +
                    "; add constraints (p = " + std::to_string(p) + ")");
  }

  // (L F)^+ = V S^-1 U^T
  Vector inv(k);
  for (Eigen::Index i = 0; i < k; ++i) inv[i] = 1.0 / sv[i];
  const Matrix lf_pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  RowMatrix M = basis.F * lf_pinv;

  const Vector yc = basis.H * d;
  Vector y_h = yc - M * (L.entries * yc);
  Vector s = M.rowwise().norm();

  std::optional<Matrix> N;
  if (options.keep_homogeneous_map) N = basis.H - M * (L.entries * basis.H);

  SolverMeta meta;
  meta.ode_order = L.order;
  meta.support = L.support;
  meta.constraint_count = static_cast<int>(p);
  meta.scheme = L.scheme;
  meta.operator_digest = L.digest();
  meta.constraint_digest = basis.constraint_digest;
  meta.rank_tolerance = tol;
  meta.smallest_lf_singular_value = k > 0 ? sv[k - 1] : 0.0;
  return PreparedSolver(L.grid, std::move(M), std::move(y_h), std::move(s), std::move(meta),
                        std::move(N));
}

PreparedSolver prepare(const LinearOperator& L, const ConstraintSet& cs,
                       const PrepareOptions& options) {
  PreparedSolver ps = prepare(L, compute_basis(cs), cs.d, options);
  SolverMeta meta = ps.meta();
  meta.constraints = cs.constraints;
  return PreparedSolver(ps.grid(), ps.M(), ps.y_h(), ps.s(), std::move(meta), ps.N());
}

namespace {

void check_input(const PreparedSolver& ps, std::span<const double> g) {
  if (g.size() != ps.n()) {
    throw Error(ErrorCode::DimensionMismatch,
                "measurement has " + std::to_string(g.size()) + " values, expected " +
                    std::to_string(ps.n()));
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw Error(ErrorCode::InvalidMeasurement, "non-finite measurement", i);
    }
  }
}

std::span<const double> span_of(const RowMatrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<const double> span_of(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

void solve_into(const PreparedSolver& ps, std::span<const double> g, std::span<double> y) {
  check_input(ps, g);
  if (y.size() != ps.n()) throw Error(ErrorCode::DimensionMismatch, "output length differs from n");
  kernels::affine_matvec_serial(span_of(ps.M()), g, span_of(ps.y_h()), y);
}

Vector solve(const PreparedSolver& ps, std::span<const double> g) {
  Vector y(static_cast<Eigen::Index>(ps.n()));
  solve_into(ps, g, {y.data(), ps.n()});
  return y;
}

Vector solve(const PreparedSolver& ps, const Vector& g) { return solve(ps, span_of(g)); }

Vector solve_counted(const PreparedSolver& ps, std::span<const double> g,
                     kernels::FlopCount& count) {
  check_input(ps, g);
  Vector y(static_cast<Eigen::Index>(ps.n()));
  kernels::affine_matvec_counted(span_of(ps.M()), g, span_of(ps.y_h()), {y.data(), ps.n()},
                                 count);
  return y;
}

Vector propagate_covariance(const PreparedSolver& ps, double sigma_g) {
  if (!(sigma_g >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_g must be >= 0");
  return sigma_g * ps.s();
}

Vector propagate_full_covariance(const PreparedSolver& ps, const Matrix& cov_g) {
  const auto n = static_cast<Eigen::Index>(ps.n());
  if (cov_g.rows() != n || cov_g.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "covariance must be n x n");
  }
  const Matrix mc = ps.M() * cov_g;
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = std::sqrt(std::max(0.0, mc.row(i).dot(ps.M().row(i))));
  }
  return out;
}

Vector residual(const PreparedSolver& ps, const LinearOperator& L, std::span<const double> g) {
  if (L.digest() != ps.meta().operator_digest) {
    throw Error(ErrorCode::StaleOperator, "operator does not match the prepared artifact");
  }
  const Vector y = solve(ps, g);
  const Eigen::Map<const Vector> gv(g.data(), static_cast<Eigen::Index>(g.size()));
  return gv - L.entries * y;
}

Vector confidence_interval(const Vector& sigma_y, int dof, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "confidence level must lie in (0, 1)");
  }
  if (dof < 1) throw Error(ErrorCode::InvalidArgument, "dof must be >= 1");
  const double t = stats::student_t_quantile(0.5 * (1.0 + level), static_cast<double>(dof));
  return t * sigma_y;
}

Solution solve_with_diagnostics(const PreparedSolver& ps, std::span<const double> g,
                                double sigma_g, const LinearOperator* L, double alpha) {
  Solution out;
  out.y = solve(ps, g);
  out.sigma_y = propagate_covariance(ps, sigma_g);
  if (L != nullptr) {
    out.residual = residual(ps, *L, g);
    if (out.residual->size() >= 5) {
      try {
        const auto ks = stats::ks_gaussian_test(span_of(*out.residual), alpha);
        out.ks_statistic = ks.statistic;
        out.ks_gaussian = !ks.reject;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateSample) throw;
      }
    }
  }
  return out;
}

}  // namespace rtinv
