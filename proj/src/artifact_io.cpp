#include "rtinv/artifact_io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "rtinv/digest.hpp"
#include "rtinv/errors.hpp"

namespace rtinv {
namespace {

using nlohmann::json;

void write_array(std::ostream& os, const double* data, std::size_t count) {
  os << '[';
  for (std::size_t i = 0; i < count; ++i) {
    if (i) os << ',';
    os << format_g17(data[i]);
  }
  os << ']';
}

std::vector<double> read_array(const json& j, const char* key, std::size_t expected) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw Error(ErrorCode::SchemaError, std::string("artifact field '") + key + "' missing");
  }
  const json& a = j.at(key);
  if (a.size() != expected) {
    throw Error(ErrorCode::SchemaError,
                std::string("artifact field '") + key + "' has " + std::to_string(a.size()) +
                    " entries, expected " + std::to_string(expected));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const json& v : a) {
    if (!v.is_number()) throw Error(ErrorCode::SchemaError, std::string("non-numeric entry in ") + key);
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_dense_matrix(std::ostream& os, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << format_g17(m(i, j));
    }
    os << '\n';
  }
}

std::string artifact_to_json(const PreparedSolver& ps) {
  const std::size_t n = ps.n();
  const SolverMeta& meta = ps.meta();
  std::ostringstream os;
  os << "{\n  \"version\": " << kArtifactVersion << ",\n  \"n\": " << n << ",\n  \"grid\": ";
  write_array(os, ps.grid().nodes().data(), n);
  os << ",\n  \"M\": ";
  write_array(os, ps.M().data(), n * n);
  os << ",\n  \"y_h\": ";
  write_array(os, ps.y_h().data(), n);
  os << ",\n  \"s\": ";
  write_array(os, ps.s().data(), n);
  if (ps.N()) {
    const RowMatrix N = *ps.N();
    os << ",\n  \"N\": {\"rows\": " << N.rows() << ", \"cols\": " << N.cols() << ", \"data\": ";
    write_array(os, N.data(), static_cast<std::size_t>(N.size()));
    os << '}';
  }
  os << ",\n  \"meta\": {\n"
     << "    \"ode_order\": " << meta.ode_order << ",\n"
     << "    \"support_length\": " << meta.support << ",\n"
     << "    \"constraint_count\": " << meta.constraint_count << ",\n"
     << "    \"scheme\": \"" << to_string(meta.scheme) << "\",\n"
     << "    \"operator_digest\": \"" << hex_digest(meta.operator_digest) << "\",\n"
     << "    \"constraint_digest\": \"" << hex_digest(meta.constraint_digest) << "\",\n"
     << "    \"rank_tolerance\": " << format_g17(meta.rank_tolerance) << ",\n"
     << "    \"smallest_lf_singular_value\": " << format_g17(meta.smallest_lf_singular_value)
     << ",\n"
     << "    \"precision_digits\": 17,\n"
     << "    \"constraints\": [";
  for (std::size_t k = 0; k < meta.constraints.size(); ++k) {
    const Constraint& c = meta.constraints[k];
    os << (k ? ", " : "") << "{\"order\": " << c.order
       << ", \"location\": " << format_g17(c.location)
       << ", \"value\": " << format_g17(c.value) << '}';
  }
  os << "]\n  },\n  \"digest\": \"" << hex_digest(ps.content_digest()) << "\"\n}\n";
  return os.str();
}

PreparedSolver artifact_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("artifact is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kArtifactVersion) {
      throw Error(ErrorCode::SchemaError, "unsupported artifact version");
    }
    const auto n = j.at("n").get<std::size_t>();
    NodeGrid grid(read_array(j, "grid", n));
    const std::vector<double> m = read_array(j, "M", n * n);
    const std::vector<double> yh = read_array(j, "y_h", n);
    const std::vector<double> s = read_array(j, "s", n);
    const auto ni = static_cast<Eigen::Index>(n);

    const json& jm = j.at("meta");
    SolverMeta meta;
    meta.ode_order = jm.at("ode_order").get<int>();
    meta.support = jm.at("support_length").get<int>();
    meta.constraint_count = jm.at("constraint_count").get<int>();
    meta.scheme = scheme_from_string(jm.at("scheme").get<std::string>());
    meta.operator_digest = parse_hex_digest(jm.at("operator_digest").get<std::string>());
    meta.constraint_digest = parse_hex_digest(jm.at("constraint_digest").get<std::string>());
    meta.rank_tolerance = jm.at("rank_tolerance").get<double>();
    meta.smallest_lf_singular_value = jm.at("smallest_lf_singular_value").get<double>();
    for (const json& c : jm.at("constraints")) {
      meta.constraints.push_back(
          {c.at("order").get<int>(), c.at("location").get<double>(), c.at("value").get<double>()});
    }

    std::optional<Matrix> N;
    if (j.contains("N")) {
      const json& jn = j.at("N");
      const auto rows = jn.at("rows").get<Eigen::Index>();
      const auto cols = jn.at("cols").get<Eigen::Index>();
      const std::vector<double> nd =
          read_array(jn, "data", static_cast<std::size_t>(rows * cols));
      N = Eigen::Map<const RowMatrix>(nd.data(), rows, cols);
    }

    PreparedSolver ps(std::move(grid), Eigen::Map<const RowMatrix>(m.data(), ni, ni),
                      Eigen::Map<const Vector>(yh.data(), ni), Eigen::Map<const Vector>(s.data(), ni),
                      std::move(meta), std::move(N));
    const std::uint64_t stored = parse_hex_digest(j.at("digest").get<std::string>());
    if (stored != ps.content_digest()) {
      throw Error(ErrorCode::SchemaError, "artifact digest does not match its contents");
    }
    return ps;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed artifact: ") + e.what());
  }
}

void save_artifact(const PreparedSolver& ps, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << artifact_to_json(ps);
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

PreparedSolver load_artifact(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return artifact_from_json(ss.str());
}

}  // namespace rtinv
