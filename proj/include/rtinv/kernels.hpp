#pragma once

#include <cstdint>
#include <span>

namespace rtinv::kernels {

// Run-time kernels for y = M g + offset with M stored row-major (n x n).
//
// Every variant accumulates each row in the same order,
//
//     acc = M[i][0] g[0];  acc += M[i][1] g[1];  ...;  y[i] = acc + offset[i];
//
// so results are bitwise identical across variants and match the emitted C
// kernel. That is n multiplies and n adds per row, 2 n^2 FLOPs in total.
// The offset goes in last: it is usually the largest term, and adding it
// first would make every later add round at its magnitude.

/// Serial reference.
void affine_matvec_serial(std::span<const double> M, std::span<const double> g,
                          std::span<const double> offset, std::span<double> y) noexcept;

struct FlopCount {
  std::uint64_t multiplies = 0;
  std::uint64_t adds = 0;
  std::uint64_t total() const noexcept { return multiplies + adds; }
};

/// Serial reference with every floating-point operation counted.
void affine_matvec_counted(std::span<const double> M, std::span<const double> g,
                           std::span<const double> offset, std::span<double> y,
                           FlopCount& count) noexcept;

/// Rows distributed over OpenMP threads.
void affine_matvec_omp(std::span<const double> M, std::span<const double> g,
                       std::span<const double> offset, std::span<double> y) noexcept;

}  // namespace rtinv::kernels
