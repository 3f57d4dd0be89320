#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rtinv/types.hpp"

namespace rtinv {

/// Strictly increasing abscissae at which measurements and solutions live.
class NodeGrid {
 public:
  explicit NodeGrid(std::vector<double> nodes);

  /// n equally spaced nodes on the closed interval [lo, hi].
  static NodeGrid uniform(std::size_t n, double lo, double hi);

  std::size_t size() const noexcept { return x_.size(); }
  double operator[](std::size_t i) const { return x_[i]; }
  double lo() const noexcept { return x_.front(); }
  double hi() const noexcept { return x_.back(); }
  std::span<const double> nodes() const noexcept { return x_; }
  Vector as_vector() const;

  /// First index of the `support` contiguous nodes used for the stencil at
  /// node `row`: centered when possible, shifted (never shortened) at the
  /// boundaries.
  std::size_t row_window(std::size_t row, std::size_t support) const;

  /// First index of the `support` nodes nearest to `x`; equidistant
  /// candidates resolve toward the lower index.
  std::size_t nearest_window(double x, std::size_t support) const;

  /// Index of a node equal to `x` within a relative tolerance, or size().
  std::size_t find_node(double x, double rel_tol = 1e-12) const;

  bool operator==(const NodeGrid&) const = default;

 private:
  std::vector<double> x_;
};

}  // namespace rtinv
