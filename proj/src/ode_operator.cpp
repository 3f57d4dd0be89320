#include "rtinv/ode_operator.hpp"

#include <string>

#include "rtinv/digest.hpp"
#include "rtinv/errors.hpp"

namespace rtinv {

std::uint64_t LinearOperator::digest() const {
  Fnv1a h;
  h.add(entries);
  h.add(grid.nodes());
  h.add(static_cast<std::int64_t>(support));
  h.add(static_cast<std::int64_t>(order));
  return h.value();
}

LinearOperator assemble_operator(const OdeSpec& spec, const NodeGrid& grid,
                                 int support, DerivativeScheme scheme) {
  if (spec.order < 0) throw Error(ErrorCode::InvalidArgument, "ODE order must be >= 0");
  if (spec.coefficients.size() != static_cast<std::size_t>(spec.order) + 1) {
    throw Error(ErrorCode::InvalidArgument,
                "an order-" + std::to_string(spec.order) + " ODE needs " +
                    std::to_string(spec.order + 1) + " coefficients");
  }
  const double span = spec.hi - spec.lo;
  const double slack = 1e-12 * std::max(1.0, std::abs(span));
  if (grid.lo() < spec.lo - slack || grid.hi() > spec.hi + slack) {
    throw Error(ErrorCode::InvalidGrid, "grid extends beyond the ODE interval");
  }
  validate_support(grid, spec.order, support);

  const auto n = static_cast<Eigen::Index>(grid.size());
  const Vector lead = eval_vector(spec.coefficients.back(), grid);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (lead[k] == 0.0) {
      throw Error(ErrorCode::SingularLeadingCoefficient,
                  "leading coefficient vanishes at node " + std::to_string(k),
                  static_cast<std::size_t>(k));
    }
  }

  const std::vector<Matrix> d = derivative_matrices(grid, spec.order, support, scheme);

  LinearOperator op{Matrix::Zero(n, n), grid, support, spec.order, scheme};
  op.entries.diagonal() = eval_vector(spec.coefficients[0], grid);
  for (int i = 1; i <= spec.order; ++i) {
    const Vector a = i == spec.order ? lead : eval_vector(spec.coefficients[static_cast<std::size_t>(i)], grid);
    op.entries.noalias() += a.asDiagonal() * d[static_cast<std::size_t>(i - 1)];
  }
  return op;
}

}  // namespace rtinv
