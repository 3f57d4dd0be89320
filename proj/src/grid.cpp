#include "rtinv/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rtinv/errors.hpp"

namespace rtinv {

NodeGrid::NodeGrid(std::vector<double> nodes) : x_(std::move(nodes)) {
  if (x_.size() < 2) {
    throw Error(ErrorCode::InvalidGrid, "a grid needs at least two nodes");
  }
  for (std::size_t i = 0; i < x_.size(); ++i) {
    if (!std::isfinite(x_[i])) {
      throw Error(ErrorCode::InvalidGrid, "non-finite node", i);
    }
    if (i > 0 && !(x_[i] > x_[i - 1])) {
      throw Error(ErrorCode::InvalidGrid,
                  "nodes must be strictly increasing (node " +
                      std::to_string(i) + ")",
                  i);
    }
  }
}

NodeGrid NodeGrid::uniform(std::size_t n, double lo, double hi) {
  if (n < 2) throw Error(ErrorCode::InvalidGrid, "n must be at least 2");
  if (!(hi > lo)) throw Error(ErrorCode::InvalidGrid, "empty interval");
  std::vector<double> x(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) x[i] = lo + h * static_cast<double>(i);
  x.back() = hi;
  return NodeGrid(std::move(x));
}

Vector NodeGrid::as_vector() const {
  return Eigen::Map<const Vector>(x_.data(), static_cast<Eigen::Index>(x_.size()));
}

std::size_t NodeGrid::row_window(std::size_t row, std::size_t support) const {
  const std::size_t n = x_.size();
  if (support == 0 || support > n) {
    throw Error(ErrorCode::InsufficientNodes, "support exceeds node count");
  }
  const std::size_t half = (support - 1) / 2;
  const std::size_t start = row > half ? row - half : 0;
  return std::min(start, n - support);
}

std::size_t NodeGrid::nearest_window(double x, std::size_t support) const {
  const std::size_t n = x_.size();
  if (support == 0 || support > n) {
    throw Error(ErrorCode::InsufficientNodes, "support exceeds node count");
  }
  // nearest node, ties toward the lower index
  auto it = std::lower_bound(x_.begin(), x_.end(), x);
  std::size_t c = static_cast<std::size_t>(it - x_.begin());
  if (c == n) {
    c = n - 1;
  } else if (c > 0 && (x - x_[c - 1]) <= (x_[c] - x)) {
    c = c - 1;
  }
  std::size_t lo = c, hi = c;  // inclusive
  while (hi - lo + 1 < support) {
    if (lo == 0) {
      ++hi;
    } else if (hi == n - 1) {
      --lo;
    } else if (x - x_[lo - 1] <= x_[hi + 1] - x) {
      --lo;
    } else {
      ++hi;
    }
  }
  return lo;
}

std::size_t NodeGrid::find_node(double x, double rel_tol) const {
  const double tol = rel_tol * std::max(1.0, hi() - lo());
  auto it = std::lower_bound(x_.begin(), x_.end(), x - tol);
  if (it != x_.end() && std::abs(*it - x) <= tol) {
    return static_cast<std::size_t>(it - x_.begin());
  }
  return x_.size();
}

}  // namespace rtinv
