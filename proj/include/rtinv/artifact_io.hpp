#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "rtinv/solver.hpp"

namespace rtinv {

inline constexpr int kArtifactVersion = 1;

/// JSON document {version, n, grid, M (row-major), y_h, s, [N], meta, digest}
/// with every number written as a 17-significant-digit decimal.
std::string artifact_to_json(const PreparedSolver& ps);

/// Parses and validates an artifact; throws SchemaError on malformed input
/// or a digest that does not match the arrays.
PreparedSolver artifact_from_json(const std::string& text);

void save_artifact(const PreparedSolver& ps, const std::filesystem::path& path);
PreparedSolver load_artifact(const std::filesystem::path& path);

/// %.17g
std::string format_g17(double v);

/// Dense row-major text, one matrix row per line, 17 significant digits.
void write_dense_matrix(std::ostream& os, const Matrix& m);

}  // namespace rtinv
