#include "rtinv/local_weights.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rtinv/errors.hpp"

namespace rtinv {

StencilWeights fd_weights(std::span<const double> window_nodes, double x_eval,
                          int max_order) {
  const std::size_t len = window_nodes.size();
  if (len == 0) {
    throw Error(ErrorCode::InsufficientSupport, "empty stencil window");
  }
  if (max_order < 0 || static_cast<std::size_t>(max_order) >= len) {
    throw Error(ErrorCode::InsufficientSupport,
                "derivative order " + std::to_string(max_order) +
                    " needs more than " + std::to_string(len) + " nodes");
  }
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = i + 1; j < len; ++j) {
      if (window_nodes[i] == window_nodes[j]) {
        throw Error(ErrorCode::DegenerateStencil, "duplicate stencil node", j);
      }
    }
  }

  const auto m = static_cast<std::size_t>(max_order);
  std::vector<std::vector<double>> c(len, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = window_nodes[0] - x_eval;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < len; ++i) {
    const std::size_t mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = window_nodes[i] - x_eval;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = window_nodes[i] - window_nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k) {
          c[i][k] = c1 * (static_cast<double>(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        }
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k) {
        c[j][k] = (c4 * c[j][k] - static_cast<double>(k) * c[j][k - 1]) / c3;
      }
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }

  StencilWeights out;
  out.x_eval = x_eval;
  out.window_indices.resize(len);
  for (std::size_t j = 0; j < len; ++j) out.window_indices[j] = j;
  out.weights_by_order.assign(m + 1, std::vector<double>(len));
  for (std::size_t k = 0; k <= m; ++k) {
    for (std::size_t j = 0; j < len; ++j) out.weights_by_order[k][j] = c[j][k];
  }
  return out;
}

void validate_support(const NodeGrid& grid, int order, int support) {
  if (support < 1 || support % 2 == 0) {
    throw Error(ErrorCode::UnsupportedSupport,
                "support length must be odd, got " + std::to_string(support));
  }
  if (static_cast<std::size_t>(support) > grid.size()) {
    throw Error(ErrorCode::InsufficientNodes,
                "support length " + std::to_string(support) + " exceeds " +
                    std::to_string(grid.size()) + " nodes");
  }
  if (order >= support) {
    throw Error(ErrorCode::InsufficientSupport,
                "derivative order " + std::to_string(order) +
                    " requires support length > order");
  }
}

DiffMatrix build_diff_matrix(const NodeGrid& grid, int order, int support) {
  if (order < 1) {
    throw Error(ErrorCode::InvalidArgument, "differentiation order must be >= 1");
  }
  validate_support(grid, order, support);

  const std::size_t n = grid.size();
  const auto ls = static_cast<std::size_t>(support);
  DiffMatrix d;
  d.order = order;
  d.support = support;
  d.entries = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

  const auto nodes = grid.nodes();
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t s = grid.row_window(r, ls);
    const auto window = nodes.subspan(s, ls);
    const StencilWeights w = fd_weights(window, nodes[r], order);
    for (std::size_t j = 0; j < ls; ++j) {
      d.entries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s + j)) =
          w.weights_by_order[static_cast<std::size_t>(order)][j];
    }
    double gmin = window[1] - window[0], gmax = gmin;
    for (std::size_t j = 2; j < ls; ++j) {
      gmin = std::min(gmin, window[j] - window[j - 1]);
      gmax = std::max(gmax, window[j] - window[j - 1]);
    }
    if (ls > 1) d.max_gap_ratio = std::max(d.max_gap_ratio, gmax / gmin);
  }
  d.poorly_conditioned = d.max_gap_ratio > kGapRatioWarning;
  return d;
}

const char* to_string(DerivativeScheme scheme) noexcept {
  return scheme == DerivativeScheme::Composed ? "composed" : "direct";
}

DerivativeScheme scheme_from_string(const std::string& name) {
  if (name == "composed") return DerivativeScheme::Composed;
  if (name == "direct") return DerivativeScheme::Direct;
  throw Error(ErrorCode::InvalidArgument, "unknown derivative scheme '" + name + "'");
}

std::vector<Matrix> derivative_matrices(const NodeGrid& grid, int max_order,
                                        int support, DerivativeScheme scheme) {
  std::vector<Matrix> out;
  if (max_order < 1) return out;
  validate_support(grid, max_order, support);
  out.reserve(static_cast<std::size_t>(max_order));
  out.push_back(build_diff_matrix(grid, 1, support).entries);
  for (int i = 2; i <= max_order; ++i) {
    if (scheme == DerivativeScheme::Composed) {
      out.push_back(out.front() * out.back());
    } else {
      out.push_back(build_diff_matrix(grid, i, support).entries);
    }
  }
  return out;
}

}  // namespace rtinv
