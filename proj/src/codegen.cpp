#include "rtinv/codegen.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "rtinv/artifact_io.hpp"
#include "rtinv/digest.hpp"
#include "rtinv/errors.hpp"

namespace rtinv::codegen {
namespace {

bool is_c_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return true;
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string literal(double v, Precision p) {
  char buf[48];
  if (p == Precision::Double) {
    std::snprintf(buf, sizeof buf, "%.16e", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.8ef", static_cast<double>(static_cast<float>(v)));
  }
  return buf;
}

void emit_array(std::ostringstream& os, const std::string& type, const std::string& name,
                const std::string& size_expr, const double* data, std::size_t count,
                Precision p) {
  os << "static const " << type << ' ' << name << '[' << size_expr << "] = {\n";
  for (std::size_t i = 0; i < count; ++i) {
    if (i % 4 == 0) os << "    ";
    os << literal(data[i], p);
    if (i + 1 < count) os << ',';
    os << ((i % 4 == 3 || i + 1 == count) ? "\n" : " ");
  }
  os << "};\n\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::vector<std::vector<double>> parse_csv_rows(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    }
    std::vector<double> row;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) {
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str()) throw Error(ErrorCode::SchemaError, "malformed CSV field '" + field + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

const char* to_string(Precision p) noexcept { return p == Precision::Double ? "double" : "single"; }

Precision precision_from_string(const std::string& name) {
  if (name == "double") return Precision::Double;
  if (name == "single") return Precision::Single;
  throw Error(ErrorCode::InvalidArgument, "precision must be 'double' or 'single'");
}

EmittedKernel emit_c(const PreparedSolver& ps, const EmitConfig& cfg) {
  if (!is_c_identifier(cfg.symbol_prefix)) {
    throw Error(ErrorCode::InvalidIdentifier,
                "'" + cfg.symbol_prefix + "' is not a valid C identifier");
  }
  const std::string& px = cfg.symbol_prefix;
  const std::string PX = upper(px);
  const std::string real = px + "_real";
  const std::string nmac = PX + "_N";
  const std::size_t n = ps.n();
  const char* ctype = cfg.precision == Precision::Double ? "double" : "float";

  EmittedKernel k;
  k.header_name = px + "_solver.h";
  k.source_name = px + "_solver.c";

  std::ostringstream h;
  h << "/* Generated real-time inverse solver kernel. Do not edit.\n"
    << " * n = " << n << ", support length = " << ps.meta().support
    << ", precision = " << to_string(cfg.precision) << "\n"
    << " * artifact digest " << hex_digest(ps.content_digest()) << "\n */\n"
    << "#ifndef " << PX << "_SOLVER_H\n#define " << PX << "_SOLVER_H\n\n"
    << "#define " << nmac << ' ' << n << "\n\n"
    << "typedef " << ctype << ' ' << real << ";\n\n"
    << "/* y = M g + y_h: " << n * n << " multiplies and " << n * n << " adds. */\n"
    << "void " << px << "_solve(const " << real << " *g, " << real << " *y);\n";
  if (cfg.emit_sigma) {
    h << "\n/* sigma_y = sigma_g s for i.i.d. measurement noise. */\n"
      << "void " << px << "_sigma(" << real << " sigma_g, " << real << " *sigma_y);\n";
  }
  h << "\n#endif /* " << PX << "_SOLVER_H */\n";
  k.header = h.str();

  std::ostringstream s;
  s << "/* Generated real-time inverse solver kernel. Do not edit. */\n"
    << "#include \"" << k.header_name << "\"\n\n";
  const RowMatrix& M = ps.M();
  emit_array(s, real, px + "_M", nmac + " * " + nmac, M.data(), n * n, cfg.precision);
  emit_array(s, real, px + "_y_h", nmac, ps.y_h().data(), n, cfg.precision);
  if (cfg.emit_sigma) emit_array(s, real, px + "_s", nmac, ps.s().data(), n, cfg.precision);

  s << "void " << px << "_solve(const " << real << " *g, " << real << " *y)\n{\n"
    << "    const " << real << " *row = " << px << "_M;\n"
    << "    int i, j;\n"
    << "    for (i = 0; i < " << nmac << "; ++i) {\n"
    << "        " << real << " acc = row[0] * g[0];\n"
    << "        for (j = 1; j < " << nmac << "; ++j) {\n";
  if (cfg.use_mac) {
    s << "            acc += row[j] * g[j];\n";
  } else {
    s << "            const " << real << " prod = row[j] * g[j];\n"
      << "            acc = acc + prod;\n";
  }
  s << "        }\n"
    << "        y[i] = acc + " << px << "_y_h[i];\n"
    << "        row += " << nmac << ";\n"
    << "    }\n}\n";
  if (cfg.emit_sigma) {
    s << "\nvoid " << px << "_sigma(" << real << " sigma_g, " << real << " *sigma_y)\n{\n"
      << "    int i;\n"
      << "    for (i = 0; i < " << nmac << "; ++i) {\n"
      << "        sigma_y[i] = sigma_g * " << px << "_s[i];\n"
      << "    }\n}\n";
  }
  k.source = s.str();
  return k;
}

std::string emit_harness(const EmitConfig& cfg) {
  if (!is_c_identifier(cfg.symbol_prefix)) {
    throw Error(ErrorCode::InvalidIdentifier,
                "'" + cfg.symbol_prefix + "' is not a valid C identifier");
  }
  const std::string& px = cfg.symbol_prefix;
  const std::string N = upper(px) + "_N";
  const std::string real = px + "_real";
  std::string t = R"C(/* Generated conformance harness. Usage: harness <vectors.csv> <out.csv> [--bench k]
 * Exit codes: 0 ok, 1 I/O or malformed row, 2 dimension mismatch. */
#define _POSIX_C_SOURCE 199309L
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <time.h>

#include "@PX@_solver.h"

#define LINE_CHARS (@N@ * 2 * 40 + 1024)

static char line[LINE_CHARS];
static @REAL@ g[@N@];
static @REAL@ y[@N@];

/* 0 ok, 1 malformed, 2 wrong field count; g is filled from the first N fields */
static int parse_row(const char *text)
{
    const char *p = text;
    int count = 0;
    for (;;) {
        char *end;
        double v;
        while (*p == ' ' || *p == '\t') ++p;
        v = strtod(p, &end);
        if (end == p) return 1;
        if (count < @N@) g[count] = (@REAL@)v;
        ++count;
        p = end;
        while (*p == ' ' || *p == '\t') ++p;
        if (*p == ',') {
            ++p;
            continue;
        }
        if (*p == '\0' || *p == '\n' || *p == '\r') break;
        return 1;
    }
    return (count == @N@ || count == 2 * @N@) ? 0 : 2;
}

int main(int argc, char **argv)
{
    FILE *in;
    FILE *out;
    long bench = 0;
    int first = 1;
    int have_row = 0;
    int i;

    if (argc == 5 && strcmp(argv[3], "--bench") == 0) {
        bench = strtol(argv[4], NULL, 10);
        if (bench <= 0) {
            fprintf(stderr, "--bench needs a positive count\n");
            return 1;
        }
    } else if (argc != 3) {
        fprintf(stderr, "usage: %s <vectors.csv> <out.csv> [--bench k]\n", argv[0]);
        return 1;
    }
    in = fopen(argv[1], "r");
    if (in == NULL) {
        perror(argv[1]);
        return 1;
    }
    out = fopen(argv[2], "w");
    if (out == NULL) {
        perror(argv[2]);
        fclose(in);
        return 1;
    }
    for (i = 0; i < @N@; ++i) fprintf(out, i ? ",y_%d" : "y_%d", i);
    fputc('\n', out);

    while (fgets(line, sizeof line, in) != NULL) {
        size_t len = strlen(line);
        int rc;
        if (len + 1 == sizeof line && line[len - 1] != '\n') {
            fprintf(stderr, "line too long\n");
            fclose(in);
            fclose(out);
            return 1;
        }
        if (first) {
            first = 0;
            if (line[0] == 'g') continue;
        }
        if (line[0] == '\n' || line[0] == '\r' || line[0] == '\0') continue;
        rc = parse_row(line);
        if (rc != 0) {
            fprintf(stderr, rc == 2 ? "dimension mismatch\n" : "malformed row\n");
            fclose(in);
            fclose(out);
            return rc;
        }
        @PX@_solve(g, y);
        for (i = 0; i < @N@; ++i) fprintf(out, i ? ",%.17g" : "%.17g", (double)y[i]);
        fputc('\n', out);
        have_row = 1;
    }
    fclose(in);
    if (fclose(out) != 0) return 1;

    if (bench > 0 && have_row) {
        struct timespec t0, t1;
        volatile @REAL@ sink = 0;
        long k;
        double elapsed;
        clock_gettime(CLOCK_MONOTONIC, &t0);
        for (k = 0; k < bench; ++k) {
            @PX@_solve(g, y);
            sink += y[k % @N@];
        }
        clock_gettime(CLOCK_MONOTONIC, &t1);
        (void)sink;
        elapsed = (double)(t1.tv_sec - t0.tv_sec) + 1e-9 * (double)(t1.tv_nsec - t0.tv_nsec);
        printf("mean_solve_seconds %.9e\n", elapsed / (double)bench);
    }
    return 0;
}
)C";
  const auto replace_all = [&t](const std::string& from, const std::string& to) {
    for (std::size_t pos = t.find(from); pos != std::string::npos; pos = t.find(from, pos + to.size())) {
      t.replace(pos, from.size(), to);
    }
  };
  replace_all("@PX@", px);
  replace_all("@N@", N);
  replace_all("@REAL@", real);
  return t;
}

std::vector<double> parse_emitted_array(const std::string& source, const std::string& name) {
  const std::size_t at = source.find(" " + name + "[");
  if (at == std::string::npos) throw Error(ErrorCode::SchemaError, "array '" + name + "' not found");
  const std::size_t open = source.find('{', at);
  const std::size_t close = source.find("};", open);
  if (open == std::string::npos || close == std::string::npos) {
    throw Error(ErrorCode::SchemaError, "array '" + name + "' is not terminated");
  }
  std::vector<double> out;
  const char* p = source.c_str() + open + 1;
  const char* end = source.c_str() + close;
  while (p < end) {
    while (p < end && (std::isspace(static_cast<unsigned char>(*p)) || *p == ',')) ++p;
    if (p >= end) break;
    char* q = nullptr;
    const double v = std::strtod(p, &q);
    if (q == p) throw Error(ErrorCode::SchemaError, "malformed literal in '" + name + "'");
    out.push_back(v);
    p = q;
    if (p < end && (*p == 'f' || *p == 'F')) ++p;
  }
  return out;
}

TestVectorSet emit_test_vectors(const PreparedSolver& ps, std::size_t count, std::uint64_t seed,
                                const std::vector<Vector>& extra, double sigma_g) {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "need at least one test vector");
  const auto n = static_cast<Eigen::Index>(ps.n());
  TestVectorSet set;
  set.sigma_g = sigma_g;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const Vector sigma = propagate_covariance(ps, sigma_g);
  for (std::size_t k = 0; k < count; ++k) {
    Vector g(n);
    for (Eigen::Index i = 0; i < n; ++i) g[i] = dist(rng);
    set.vectors.push_back({g, solve(ps, g), sigma, "random_" + std::to_string(k)});
  }
  for (std::size_t k = 0; k < extra.size(); ++k) {
    set.vectors.push_back({extra[k], solve(ps, extra[k]), sigma, "forcing_" + std::to_string(k)});
  }
  return set;
}

std::string test_vectors_csv(const TestVectorSet& set) {
  std::ostringstream os;
  if (set.vectors.empty()) return "";
  const Eigen::Index n = set.vectors.front().g.size();
  for (Eigen::Index i = 0; i < n; ++i) os << (i ? "," : "") << "g_" << i;
  for (Eigen::Index i = 0; i < n; ++i) os << ",y_" << i;
  os << '\n';
  for (const TestVector& v : set.vectors) {
    for (Eigen::Index i = 0; i < n; ++i) os << (i ? "," : "") << format_g17(v.g[i]);
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << format_g17(v.y[i]);
    os << '\n';
  }
  return os.str();
}

TestVectorSet parse_test_vectors_csv(const std::string& text, std::size_t n) {
  TestVectorSet set;
  const auto ni = static_cast<Eigen::Index>(n);
  std::size_t k = 0;
  for (const auto& row : parse_csv_rows(text)) {
    if (row.size() != 2 * n) {
      throw Error(ErrorCode::DimensionMismatch, "test vector row has " + std::to_string(row.size()) +
                                                    " fields, expected " + std::to_string(2 * n));
    }
    TestVector v;
    v.g = Eigen::Map<const Vector>(row.data(), ni);
    v.y = Eigen::Map<const Vector>(row.data() + n, ni);
    v.label = "row_" + std::to_string(k++);
    set.vectors.push_back(std::move(v));
  }
  return set;
}

Vector tolerance(const PreparedSolver& ps, Precision p, const Vector& g, const Vector& y) {
  if (p == Precision::Double) {
    return (1e-12 * y.cwiseAbs().array().max(1.0)).matrix();
  }
  const double u = std::ldexp(1.0, -24);
  const double k = static_cast<double>(ps.n() + 4);
  const double gamma = k * u / (1.0 - k * u);
  return gamma * (ps.M().cwiseAbs() * g.cwiseAbs() + ps.y_h().cwiseAbs());
}

void write_kernel_dir(const std::filesystem::path& dir, const PreparedSolver& ps,
                      const EmitConfig& cfg, const TestVectorSet& vectors) {
  std::filesystem::create_directories(dir);
  const EmittedKernel k = emit_c(ps, cfg);
  write_file(dir / k.header_name, k.header);
  write_file(dir / k.source_name, k.source);
  write_file(dir / "harness.c", emit_harness(cfg));
  write_file(dir / "vectors.csv", test_vectors_csv(vectors));

  nlohmann::ordered_json m;
  m["prefix"] = cfg.symbol_prefix;
  m["precision"] = to_string(cfg.precision);
  m["use_mac"] = cfg.use_mac;
  m["emit_sigma"] = cfg.emit_sigma;
  m["n"] = ps.n();
  m["artifact_digest"] = hex_digest(ps.content_digest());
  m["vector_count"] = vectors.vectors.size();
  std::vector<std::string> labels;
  for (const TestVector& v : vectors.vectors) labels.push_back(v.label);
  m["labels"] = labels;
  m["tolerance"] = cfg.precision == Precision::Double
                       ? "|dy_i| <= 1e-12 * max(1, |y_i|)"
                       : "|dy_i| <= gamma_(n+4) * (|M| |g| + |y_h|)_i, u = 2^-24";
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

bool VerifyReport::ok() const {
  if (!compiled || !constants_match) return false;
  for (const VectorDelta& d : deltas) {
    if (!d.within_tolerance) return false;
  }
  return !deltas.empty();
}

std::string default_compiler() {
  if (const char* cc = std::getenv("RTINV_CC"); cc != nullptr && *cc != '\0') return cc;
  if (const char* cc = std::getenv("CC"); cc != nullptr && *cc != '\0') return cc;
  return "cc";
}

bool compiler_available(const std::string& compiler) {
  const std::string cmd = "command -v " + shell_quote(compiler) + " >/dev/null 2>&1";
  return std::system(cmd.c_str()) == 0;
}

VerifyReport verify_kernel_dir(const std::filesystem::path& dir, const PreparedSolver& ps,
                               const std::string& compiler) {
  const nlohmann::json manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  const std::string prefix = manifest.at("prefix").get<std::string>();
  const Precision precision = precision_from_string(manifest.at("precision").get<std::string>());
  const std::vector<std::string> labels =
      manifest.value("labels", std::vector<std::string>{});
  if (manifest.at("n").get<std::size_t>() != ps.n()) {
    throw Error(ErrorCode::DimensionMismatch, "kernel dimension differs from the artifact");
  }

  VerifyReport rep;

  // embedded constants against the artifact (after the same downcast)
  const std::string source = read_file(dir / (prefix + "_solver.c"));
  const auto check_array = [&](const std::string& name, const double* ref, std::size_t count) {
    const std::vector<double> got = parse_emitted_array(source, name);
    if (got.size() != count) {
      rep.constants_match = false;
      rep.constant_diffs.push_back(name + ": " + std::to_string(got.size()) + " entries, expected " +
                                   std::to_string(count));
      return;
    }
    for (std::size_t i = 0; i < count; ++i) {
      // 9 significant digits identify a float uniquely, so compare as floats
      const bool same = precision == Precision::Double
                            ? got[i] == ref[i]
                            : static_cast<float>(got[i]) == static_cast<float>(ref[i]);
      if (!same) {
        const double want =
            precision == Precision::Double ? ref[i] : static_cast<double>(static_cast<float>(ref[i]));
        rep.constants_match = false;
        rep.constant_diffs.push_back(name + "[" + std::to_string(i) + "]: " + format_g17(got[i]) +
                                     " != " + format_g17(want));
      }
    }
  };
  check_array(prefix + "_M", ps.M().data(), ps.n() * ps.n());
  check_array(prefix + "_y_h", ps.y_h().data(), ps.n());
  if (manifest.value("emit_sigma", false)) check_array(prefix + "_s", ps.s().data(), ps.n());

  if (!compiler_available(compiler)) {
    throw Error(ErrorCode::IoError, "C compiler '" + compiler + "' not found");
  }
  const std::filesystem::path exe = dir / "harness";
  const std::filesystem::path log = dir / "compile.log";
  const std::string compile = shell_quote(compiler) +
                              " -std=c99 -pedantic -Wall -Wextra -Werror -O2 -ffp-contract=off -o " +
                              shell_quote(exe.string()) + " " +
                              shell_quote((dir / "harness.c").string()) + " " +
                              shell_quote((dir / (prefix + "_solver.c")).string()) + " > " +
                              shell_quote(log.string()) + " 2>&1";
  rep.compiled = std::system(compile.c_str()) == 0;
  rep.compiler_output = read_file(log);
  if (!rep.compiled) return rep;

  const std::filesystem::path out = dir / "out.csv";
  const std::string run = shell_quote(exe.string()) + " " +
                          shell_quote((dir / "vectors.csv").string()) + " " +
                          shell_quote(out.string());
  if (std::system(run.c_str()) != 0) {
    throw Error(ErrorCode::IoError, "harness failed on vectors.csv");
  }

  const TestVectorSet vectors = parse_test_vectors_csv(read_file(dir / "vectors.csv"), ps.n());
  const auto rows = parse_csv_rows(read_file(out));
  if (rows.size() != vectors.vectors.size()) {
    throw Error(ErrorCode::DimensionMismatch, "harness produced " + std::to_string(rows.size()) +
                                                  " rows for " +
                                                  std::to_string(vectors.vectors.size()) + " vectors");
  }
  const auto ni = static_cast<Eigen::Index>(ps.n());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != ps.n()) throw Error(ErrorCode::DimensionMismatch, "harness row width");
    const Vector& g = vectors.vectors[k].g;
    const Vector y_ref = solve(ps, g);
    const Vector y_c = Eigen::Map<const Vector>(rows[k].data(), ni);
    const Vector delta = y_c - y_ref;
    const Vector tol = tolerance(ps, precision, g, y_ref);
    VectorDelta d;
    d.label = k < labels.size() ? labels[k] : vectors.vectors[k].label;
    d.norm2 = delta.norm();
    d.max_abs = delta.cwiseAbs().maxCoeff();
    d.within_tolerance = (delta.cwiseAbs().array() <= tol.array()).all();
    rep.deltas.push_back(d);
  }
  return rep;
}

}  // namespace rtinv::codegen
