#include "rtinv/kernels.hpp"

#include <cstddef>

namespace rtinv::kernels {
namespace {

// Rows [first, last). Four rows are interleaved so that four independent
// add chains are in flight; each row still sums in its own fixed order.
inline void rows_block(const double* m, const double* g, const double* off, double* y,
                       std::size_t n, std::size_t first, std::size_t last) noexcept {
  std::size_t i = first;
  for (; i + 4 <= last; i += 4) {
    const double* r0 = m + i * n;
    const double* r1 = r0 + n;
    const double* r2 = r1 + n;
    const double* r3 = r2 + n;
    double a0 = r0[0] * g[0];
    double a1 = r1[0] * g[0];
    double a2 = r2[0] * g[0];
    double a3 = r3[0] * g[0];
    for (std::size_t j = 1; j < n; ++j) {
      const double gj = g[j];
      a0 += r0[j] * gj;
      a1 += r1[j] * gj;
      a2 += r2[j] * gj;
      a3 += r3[j] * gj;
    }
    y[i] = a0 + off[i];
    y[i + 1] = a1 + off[i + 1];
    y[i + 2] = a2 + off[i + 2];
    y[i + 3] = a3 + off[i + 3];
  }
  for (; i < last; ++i) {
    const double* row = m + i * n;
    double acc = row[0] * g[0];
    for (std::size_t j = 1; j < n; ++j) acc += row[j] * g[j];
    y[i] = acc + off[i];
  }
}

}  // namespace

void affine_matvec_serial(std::span<const double> M, std::span<const double> g,
                          std::span<const double> offset, std::span<double> y) noexcept {
  const std::size_t n = g.size();
  rows_block(M.data(), g.data(), offset.data(), y.data(), n, 0, n);
}

void affine_matvec_counted(std::span<const double> M, std::span<const double> g,
                           std::span<const double> offset, std::span<double> y,
                           FlopCount& count) noexcept {
  const std::size_t n = g.size();
  const double* row = M.data();
  for (std::size_t i = 0; i < n; ++i, row += n) {
    double acc = row[0] * g[0];
    ++count.multiplies;
    for (std::size_t j = 1; j < n; ++j) {
      const double prod = row[j] * g[j];
      ++count.multiplies;
      acc += prod;
      ++count.adds;
    }
    y[i] = acc + offset[i];
    ++count.adds;
  }
}

void affine_matvec_omp(std::span<const double> M, std::span<const double> g,
                       std::span<const double> offset, std::span<double> y) noexcept {
  const std::size_t n = g.size();
  const auto blocks = static_cast<std::ptrdiff_t>((n + 3) / 4);
#pragma omp parallel for schedule(static) if (n >= 128)
  for (std::ptrdiff_t b = 0; b < blocks; ++b) {
    const auto first = static_cast<std::size_t>(b) * 4;
    rows_block(M.data(), g.data(), offset.data(), y.data(), n, first, first + 4 < n ? first + 4 : n);
  }
}

}  // namespace rtinv::kernels
