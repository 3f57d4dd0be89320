#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rtinv/expr.hpp"
#include "rtinv/grid.hpp"
#include "rtinv/local_weights.hpp"
#include "rtinv/types.hpp"

namespace rtinv {

/// a_m(x) y^(m) + ... + a_1(x) y' + a_0(x) y = g(x) on [lo, hi].
struct OdeSpec {
  int order = 1;
  /// coefficients[i] multiplies the i-th derivative; size order+1.
  std::vector<Expression> coefficients;
  /// Synthetic forcing for tests; in production g arrives as measurements.
  std::optional<Expression> forcing;
  double lo = 0.0;
  double hi = 1.0;
};

/// Discrete operator L = sum_i diag(a_i(x)) D_i with D_0 = I.
struct LinearOperator {
  Matrix entries;
  NodeGrid grid;
  int support = 3;
  int order = 1;
  DerivativeScheme scheme = DerivativeScheme::Composed;

  std::uint64_t digest() const;
};

LinearOperator assemble_operator(const OdeSpec& spec, const NodeGrid& grid,
                                 int support,
                                 DerivativeScheme scheme = DerivativeScheme::Composed);

}  // namespace rtinv
