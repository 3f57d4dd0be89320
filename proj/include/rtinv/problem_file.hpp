#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rtinv/constraints.hpp"
#include "rtinv/expr.hpp"
#include "rtinv/grid.hpp"
#include "rtinv/ode_operator.hpp"

namespace rtinv {

/// A problem definition file (JSON):
///
///     {
///       "name": "testA",
///       "ode": {"order": 3, "coefficients": ["1", "3", "3", "1"],
///               "forcing": "30*exp(-x)"},
///       "grid": {"n": 77, "lo": 0, "hi": 8, "spacing": "uniform"},
///       "constraints": [{"order": 0, "location": 0, "value": 3}, ...],
///       "discretization": {"support_length": 9, "scheme": "composed"},
///       "noise": {"sigma_g": 0.01},
///       "reference": {"solution": "...", "max_error_2norm": 1e-6}
///     }
///
/// coefficients[i] multiplies the i-th derivative. The grid is either
/// {"nodes": [...]} or the uniform form. "forcing", "noise", "reference"
/// and "scheme" are optional.
struct ProblemFile {
  std::string name;
  OdeSpec ode;
  NodeGrid grid;
  std::vector<Constraint> constraints;
  int support = 0;
  DerivativeScheme scheme = DerivativeScheme::Composed;
  std::optional<double> sigma_g;
  std::optional<Expression> solution;
  std::optional<double> max_error_2norm;
};

/// Schema-validates before any numerics; throws SchemaError naming the
/// offending field.
ProblemFile parse_problem(const std::string& json_text);
ProblemFile load_problem(const std::filesystem::path& path);

/// Inverse of parse_problem. A grid equal to NodeGrid::uniform over its
/// ends is written in the uniform form, anything else as a node list.
std::string problem_to_json(const ProblemFile& pf);

}  // namespace rtinv
