#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rtinv/grid.hpp"
#include "rtinv/types.hpp"

namespace rtinv {

/// Interpolation/differentiation weights of one local polynomial fit.
struct StencilWeights {
  std::vector<std::size_t> window_indices;
  /// weights_by_order[i][j]: weight of window node j for the i-th derivative.
  std::vector<std::vector<double>> weights_by_order;
  double x_eval = 0.0;
};

/// Weights of the i-th derivative (i = 0..max_order) at `x_eval` of the
/// degree-(l_s-1) interpolant through `window_nodes`, computed with the
/// incremental Newton-form recursion (no Vandermonde solve).
StencilWeights fd_weights(std::span<const double> window_nodes, double x_eval,
                          int max_order);

struct DiffMatrix {
  int order = 1;
  int support = 3;
  Matrix entries;
  /// Largest ratio of widest to narrowest node gap over all row windows.
  double max_gap_ratio = 1.0;
  /// Set when max_gap_ratio exceeds kGapRatioWarning; local fits on such
  /// windows can amplify roundoff.
  bool poorly_conditioned = false;
};

inline constexpr double kGapRatioWarning = 1e3;

/// n-by-n matrix whose row r holds the order-`order` weights over the
/// `support` nodes around r. Windows are centered and shifted at the ends so
/// every row has approximation degree support-1.
DiffMatrix build_diff_matrix(const NodeGrid& grid, int order, int support);

/// How derivative matrices of order >= 2 are formed from local weights.
enum class DerivativeScheme {
  /// D_i = D_1^i; the default.
  Composed,
  /// D_i built from order-i stencil weights directly.
  Direct,
};

const char* to_string(DerivativeScheme scheme) noexcept;
DerivativeScheme scheme_from_string(const std::string& name);

/// D_1..D_max_order under `scheme`; element k holds D_{k+1}.
std::vector<Matrix> derivative_matrices(const NodeGrid& grid, int max_order,
                                        int support, DerivativeScheme scheme);

/// Checks shared by every support-length consumer.
void validate_support(const NodeGrid& grid, int order, int support);

}  // namespace rtinv
