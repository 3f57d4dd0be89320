#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rtinv/solver.hpp"

namespace rtinv::codegen {

enum class Precision { Double, Single };

const char* to_string(Precision p) noexcept;
Precision precision_from_string(const std::string& name);

struct EmitConfig {
  Precision precision = Precision::Double;
  std::string symbol_prefix = "rtinv";
  /// Emit the inner loop as a single multiply-accumulate statement instead
  /// of a separate product and sum. Same arithmetic either way.
  bool use_mac = false;
  bool emit_sigma = true;
};

struct EmittedKernel {
  std::string header_name;
  std::string source_name;
  std::string header;
  std::string source;
};

/// C99 header/source pair embedding M, y_h and optionally s. Throws
/// InvalidIdentifier for a prefix that is not a C identifier.
EmittedKernel emit_c(const PreparedSolver& ps, const EmitConfig& cfg);

/// Conformance harness: `harness <vectors.csv> <out.csv> [--bench k]`.
/// Exit 0 ok, 1 I/O or malformed row, 2 dimension mismatch.
std::string emit_harness(const EmitConfig& cfg);

/// Values of a `static const` array in emitted source, in order.
std::vector<double> parse_emitted_array(const std::string& source, const std::string& name);

struct TestVector {
  Vector g;
  Vector y;
  Vector sigma_y;
  std::string label;
};

struct TestVectorSet {
  std::vector<TestVector> vectors;
  double sigma_g = 1.0;
};

/// `count` seeded random measurement vectors followed by `extra` (e.g. a
/// test problem's forcing samples); expectations from the double solver.
TestVectorSet emit_test_vectors(const PreparedSolver& ps, std::size_t count, std::uint64_t seed,
                                const std::vector<Vector>& extra = {}, double sigma_g = 1.0);

/// Header `g_0,...,g_{n-1},y_0,...,y_{n-1}`, one row per vector, 17 digits.
std::string test_vectors_csv(const TestVectorSet& set);
TestVectorSet parse_test_vectors_csv(const std::string& text, std::size_t n);

/// Per-element acceptance bound for a kernel result against the double
/// solver. Double: 1e-12 max(1, |y_i|). Single: gamma_{n+2} (|M||g| + |y_h|)_i
/// with gamma_k = k u / (1 - k u), u = 2^-24, plus the rounding of g itself.
Vector tolerance(const PreparedSolver& ps, Precision p, const Vector& g, const Vector& y);

/// Writes <prefix>_solver.h/.c, harness.c, vectors.csv and manifest.json.
void write_kernel_dir(const std::filesystem::path& dir, const PreparedSolver& ps,
                      const EmitConfig& cfg, const TestVectorSet& vectors);

struct VectorDelta {
  std::string label;
  double norm2 = 0.0;
  double max_abs = 0.0;
  bool within_tolerance = true;
};

struct VerifyReport {
  bool compiled = false;
  bool constants_match = true;
  std::vector<std::string> constant_diffs;
  std::vector<VectorDelta> deltas;
  std::string compiler_output;
  bool ok() const;
};

/// Compiles the harness with `compiler` (C99, warnings as errors), runs it
/// on vectors.csv and compares with the double solver on `ps`. Also diffs
/// the embedded constants against `ps`. Throws IoError if the compiler
/// cannot be run.
VerifyReport verify_kernel_dir(const std::filesystem::path& dir, const PreparedSolver& ps,
                               const std::string& compiler);

/// `RTINV_CC`, else `CC`, else "cc".
std::string default_compiler();
bool compiler_available(const std::string& compiler);

}  // namespace rtinv::codegen
