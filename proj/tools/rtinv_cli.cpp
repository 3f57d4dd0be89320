// rtinv: prepare, solve, experiment, emit, verify and dump.
//
// Exit codes: 0 ok, 1 I/O or invalid input, 2 dimension mismatch,
// 3 ill-posed, 4 inconsistent or dependent constraints, 5 C toolchain
// missing, 6 emitted kernel disagrees with the artifact.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rtinv/artifact_io.hpp"
#include "rtinv/codegen.hpp"
#include "rtinv/constraints.hpp"
#include "rtinv/digest.hpp"
#include "rtinv/errors.hpp"
#include "rtinv/local_weights.hpp"
#include "rtinv/ode_operator.hpp"
#include "rtinv/problem_file.hpp"
#include "rtinv/reference.hpp"
#include "rtinv/solver.hpp"
#include "rtinv/stats.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace rtinv;

namespace {

constexpr int kOk = 0;
constexpr int kIo = 1;
constexpr int kDimension = 2;
constexpr int kIllPosed = 3;
constexpr int kConstraints = 4;
constexpr int kToolchain = 5;
constexpr int kMismatch = 6;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::DimensionMismatch:
    case ErrorCode::InvalidMeasurement:
      return kDimension;
    case ErrorCode::Underconstrained:
    case ErrorCode::SingularLeadingCoefficient:
      return kIllPosed;
    case ErrorCode::InconsistentConstraints:
    case ErrorCode::DependentConstraints:
      return kConstraints;
    default:
      return kIo;
  }
}

std::string g17(double v) { return format_g17(v); }

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << text;
}

// one CSV line into doubles; false on a malformed field
bool parse_fields(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    const std::string field = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const char* b = field.c_str();
    char* e = nullptr;
    const double v = std::strtod(b, &e);
    if (e == b) return false;
    while (*e == ' ' || *e == '\t' || *e == '\r') ++e;
    if (*e != '\0') return false;
    out.push_back(v);
    if (comma == std::string::npos) return true;
    pos = comma + 1;
  }
}

bool looks_like_header(const std::string& line) {
  for (char c : line) {
    if (c == ' ' || c == '\t') continue;
    return std::isalpha(static_cast<unsigned char>(c)) != 0 && c != 'e' && c != 'E' &&
           c != 'i' && c != 'I' && c != 'n' && c != 'N';
  }
  return false;
}

struct Built {
  ProblemFile pf;
  LinearOperator L;
  ConstraintSet cs;
};

Built build(const ProblemFile& pf) {
  LinearOperator L = assemble_operator(pf.ode, pf.grid, pf.support, pf.scheme);
  ConstraintSet cs = compile_constraints(pf.grid, pf.constraints, pf.support, pf.scheme);
  return {pf, std::move(L), std::move(cs)};
}

json well_posed_json(const WellPosedReport& r) {
  json j;
  j["n"] = r.n;
  j["rank"] = r.rank;
  j["rank_deficiency"] = r.rank_deficiency;
  j["well_posed"] = r.well_posed;
  j["tolerance"] = r.tolerance;
  j["smallest_singular_value"] = r.singular_values.size() ? r.singular_values.minCoeff() : 0.0;
  j["null_lf_dimension"] = r.null_lf_dimension;
  j["smallest_lf_singular_value"] = r.smallest_lf_singular_value;
  return j;
}

void print_well_posed(const WellPosedReport& r, std::ostream& os) {
  os << "rank [L; C^T]            " << r.rank << " of " << r.n << "\n"
     << "rank deficiency          " << r.rank_deficiency << "\n"
     << "smallest singular value  " << g17(r.singular_values.size() ? r.singular_values.minCoeff() : 0.0)
     << "\n"
     << "rank tolerance           " << g17(r.tolerance) << "\n"
     << "dim null(L F)            " << r.null_lf_dimension << "\n"
     << "smallest sigma(L F)      " << g17(r.smallest_lf_singular_value) << "\n"
     << "well posed               " << (r.well_posed ? "yes" : "no") << "\n";
}

// --------------------------------------------------------------------------
// prepare

struct PrepareArgs {
  std::string problem;
  std::string artifact;
  bool keep_homogeneous = false;
  bool as_json = false;
};

int cmd_prepare(const PrepareArgs& a) {
  const Built b = build(load_problem(a.problem));
  const WellPosedReport wp = check_well_posed(b.L, b.cs);
  if (!wp.well_posed) {
    if (a.as_json) {
      json j;
      j["status"] = "ill_posed";
      j["report"] = well_posed_json(wp);
      std::cout << j.dump(2) << "\n";
    } else {
      std::cerr << "error: problem is ill-posed\n";
      print_well_posed(wp, std::cerr);
    }
    return kIllPosed;
  }
  PrepareOptions opts;
  opts.keep_homogeneous_map = a.keep_homogeneous;
  const PreparedSolver ps = prepare(b.L, b.cs, opts);
  save_artifact(ps, a.artifact);
  if (a.as_json) {
    json j;
    j["status"] = "ok";
    j["artifact"] = a.artifact;
    j["n"] = ps.n();
    j["digest"] = hex_digest(ps.content_digest());
    j["report"] = well_posed_json(wp);
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "prepared " << b.pf.name << ": n = " << ps.n() << ", l_s = " << b.pf.support
              << ", scheme = " << to_string(b.pf.scheme) << "\n";
    print_well_posed(wp, std::cout);
    std::cout << "artifact                 " << a.artifact << " (" << hex_digest(ps.content_digest())
              << ")\n";
  }
  return kOk;
}

// --------------------------------------------------------------------------
// solve

struct SolveArgs {
  std::string artifact;
  std::string measurements;
  std::string out;
  std::optional<double> sigma_g;
  std::string ci;
  std::string with_operator;
  std::size_t batch = 1000;
  double alpha = 0.05;
  bool as_json = false;
};

int cmd_solve(const SolveArgs& a) {
  const PreparedSolver ps = load_artifact(a.artifact);
  const std::size_t n = ps.n();

  std::optional<LinearOperator> L;
  if (!a.with_operator.empty()) {
    const ProblemFile pf = load_problem(a.with_operator);
    L = assemble_operator(pf.ode, pf.grid, pf.support, pf.scheme);
    if (L->digest() != ps.meta().operator_digest) {
      throw Error(ErrorCode::StaleOperator, a.with_operator + " does not describe the operator of " +
                                                a.artifact);
    }
  }
  Vector sigma_y;
  Vector ci_half;
  if (a.sigma_g) sigma_y = propagate_covariance(ps, *a.sigma_g);
  if (!a.ci.empty()) {
    if (!a.sigma_g) throw Error(ErrorCode::InvalidArgument, "--ci needs --sigma-g");
    const std::size_t colon = a.ci.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "--ci expects level:dof");
    double level = 0.0;
    int dof = 0;
    try {
      level = std::stod(a.ci.substr(0, colon));
      dof = std::stoi(a.ci.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "--ci expects level:dof, got '" + a.ci + "'");
    }
    ci_half = confidence_interval(sigma_y, dof, level);
  }

  std::ifstream in(a.measurements);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + a.measurements);
  std::ofstream out(a.out);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + a.out);

  for (std::size_t i = 0; i < n; ++i) out << (i ? "," : "") << "y_" << i;
  if (a.sigma_g) for (std::size_t i = 0; i < n; ++i) out << ",sigma_y_" << i;
  if (ci_half.size()) for (std::size_t i = 0; i < n; ++i) out << ",ci_half_" << i;
  if (L) out << ",residual_2norm";
  out << "\n";

  // text of constant columns, formatted once
  std::string tail;
  for (Eigen::Index i = 0; i < sigma_y.size(); ++i) tail += "," + g17(sigma_y[i]);
  for (Eigen::Index i = 0; i < ci_half.size(); ++i) tail += "," + g17(ci_half[i]);

  std::vector<double> g;
  Vector y(static_cast<Eigen::Index>(n));
  std::vector<double> pooled;
  json batches = json::array();
  const auto close_batch = [&](std::size_t first_row, std::size_t rows) {
    if (!L || rows == 0) return;
    json bj;
    bj["first_row"] = first_row;
    bj["rows"] = rows;
    try {
      const auto ks = stats::ks_gaussian_test(pooled, a.alpha);
      bj["ks_statistic"] = ks.statistic;
      bj["critical_value"] = ks.critical_value;
      bj["gaussian"] = !ks.reject;
    } catch (const Error& e) {
      bj["gaussian"] = nullptr;
      bj["note"] = e.what();
    }
    batches.push_back(bj);
    pooled.clear();
  };

  std::string line;
  std::size_t line_no = 0;
  std::size_t rows = 0;
  std::size_t batch_start = 0;
  const auto t0 = std::chrono::steady_clock::now();
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line_no == 1 && looks_like_header(line)) continue;
    if (!parse_fields(line, g)) {
      throw Error(ErrorCode::IoError, a.measurements + ":" + std::to_string(line_no) + ": malformed row");
    }
    if (g.size() != n) {
      throw Error(ErrorCode::DimensionMismatch, a.measurements + ":" + std::to_string(line_no) +
                                                    ": " + std::to_string(g.size()) +
                                                    " fields, artifact has n = " + std::to_string(n));
    }
    solve_into(ps, g, {y.data(), n});
    for (std::size_t i = 0; i < n; ++i) {
      if (i) out << ',';
      out << g17(y[static_cast<Eigen::Index>(i)]);
    }
    out << tail;
    if (L) {
      const Vector r = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(n)) - L->entries * y;
      out << ',' << g17(r.norm());
      pooled.insert(pooled.end(), r.data(), r.data() + r.size());
    }
    out << '\n';
    ++rows;
    if (rows - batch_start == a.batch) {
      close_batch(batch_start, rows - batch_start);
      batch_start = rows;
    }
  }
  close_batch(batch_start, rows - batch_start);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.close();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + a.out);

  if (a.as_json) {
    json j;
    j["rows"] = rows;
    j["n"] = n;
    j["output"] = a.out;
    if (L) j["ks_batches"] = batches;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "solved " << rows << " rows of n = " << n << " in " << g17(seconds) << " s\n";
    for (const auto& b : batches) {
      std::cout << "batch at row " << b["first_row"].get<std::size_t>() << " (" << b["rows"].get<std::size_t>()
                << " rows): ";
      if (b["gaussian"].is_null()) {
        std::cout << "no KS verdict (" << b["note"].get<std::string>() << ")\n";
      } else {
        std::cout << "KS D = " << g17(b["ks_statistic"].get<double>()) << ", critical "
                  << g17(b["critical_value"].get<double>()) << ", residual "
                  << (b["gaussian"].get<bool>() ? "consistent with" : "NOT consistent with")
                  << " Gaussian\n";
      }
    }
  }
  return kOk;
}

// --------------------------------------------------------------------------
// experiment

struct ExperimentArgs {
  std::string name;
  std::string problem;
  std::optional<std::size_t> n;
  std::optional<int> support;
  std::string scheme = "composed";
  std::size_t k = 10000;
  std::uint64_t seed = 1;
  std::optional<double> sigma_g;
  int min_support = 3;
  int max_support = 25;
  double rtol = 1e-3;
  double atol = 1e-6;
  std::string out;
  bool as_json = false;
  bool timing = false;
};

struct Report {
  json data;
  std::string table;
};

Report experiment_test(const ExperimentArgs& a) {
  const std::string pname = a.problem.empty() ? a.name : a.problem;
  const reference::TestProblem tp = reference::test_problem(pname);
  const std::size_t n = a.n.value_or(tp.default_n);
  const int ls = a.support.value_or(tp.default_support);
  const auto r = reference::run_test_problem(tp, n, ls, scheme_from_string(a.scheme));

  json j;
  j["experiment"] = a.name;
  j["problem"] = tp.name;
  j["description"] = tp.description;
  j["n"] = n;
  j["support_length"] = ls;
  j["scheme"] = to_string(r.scheme);
  j["error_2norm"] = r.error_2norm;
  j["relative_error"] = r.relative_error;
  j["max_abs_error"] = r.max_abs_error;
  j["nodes"] = r.nodes;
  j["y"] = vec_json(r.y);
  j["y_analytic"] = vec_json(r.y_analytic);

  std::optional<reference::BaselineReport> rk;
  try {
    rk = reference::run_rk45_baseline(tp, a.rtol, a.atol);
    j["rk45"] = {{"rtol", a.rtol}, {"atol", a.atol}, {"nodes", rk->nodes.size()},
                 {"error_2norm", rk->error_2norm}};
  } catch (const Error& e) {
    j["rk45"] = {{"note", e.what()}};
  }
  if (a.timing) {
    j["timing"] = {{"prepare_seconds", r.prepare_seconds}, {"solve_seconds", r.solve_seconds}};
    if (rk) j["timing"]["rk45_seconds"] = rk->seconds;
  }

  char buf[512];
  std::string t = tp.name + ": " + tp.description + "\n\n";
  std::snprintf(buf, sizeof buf, "%-26s %6s %14s %14s %14s\n", "method", "nodes", "error 2-norm",
                "prepare [s]", "solve [s]");
  t += buf;
  std::snprintf(buf, sizeof buf, "%-26s %6zu %14.4e %14.4e %14.4e\n",
                ("constrained LS, l_s=" + std::to_string(ls)).c_str(), n, r.error_2norm,
                r.prepare_seconds, r.solve_seconds);
  t += buf;
  if (rk) {
    std::snprintf(buf, sizeof buf, "%-26s %6zu %14.4e %14s %14.4e\n", "RK45 (Dormand-Prince)",
                  rk->nodes.size(), rk->error_2norm, "-", rk->seconds);
    t += buf;
  }
  std::snprintf(buf, sizeof buf, "\nrelative error %.4e, max |error| %.4e\n", r.relative_error,
                r.max_abs_error);
  t += buf;
  return {j, t};
}

Report experiment_sweep(const ExperimentArgs& a) {
  const std::string pname = a.problem.empty() ? "testC" : a.problem;
  const reference::TestProblem tp = reference::test_problem(pname);
  const std::size_t n = a.n.value_or(tp.default_n);
  std::vector<int> supports;
  for (int ls = a.min_support; ls <= a.max_support; ++ls) {
    if (ls % 2 == 1) supports.push_back(ls);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto sweep = reference::support_sweep(tp, n, supports, scheme_from_string(a.scheme));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const int best = reference::sweep_argmin(sweep);

  json j;
  j["experiment"] = "sweep";
  j["problem"] = tp.name;
  j["n"] = n;
  j["scheme"] = a.scheme;
  json pts = json::array();
  for (const auto& p : sweep) {
    json pj;
    pj["support_length"] = p.support;
    if (p.failure.empty()) {
      pj["relative_error"] = p.relative_error;
    } else {
      pj["relative_error"] = nullptr;
      pj["failure"] = p.failure;
    }
    pts.push_back(pj);
  }
  j["points"] = pts;
  j["argmin_support_length"] = best;
  double min_err = INFINITY;
  for (const auto& p : sweep) min_err = std::min(min_err, p.relative_error);
  j["min_relative_error"] = min_err;
  if (a.timing) j["timing"] = {{"seconds", seconds}};

  char buf[256];
  std::string t = "support-length sweep on " + tp.name + ", n = " + std::to_string(n) + "\n\n";
  std::snprintf(buf, sizeof buf, "%6s %16s\n", "l_s", "relative error");
  t += buf;
  for (const auto& p : sweep) {
    if (p.failure.empty()) {
      std::snprintf(buf, sizeof buf, "%6d %16.4e%s\n", p.support, p.relative_error,
                    p.support == best ? "  <- minimum" : "");
    } else {
      std::snprintf(buf, sizeof buf, "%6d %16s  (L F numerically rank deficient)\n", p.support, "-");
    }
    t += buf;
  }
  std::snprintf(buf, sizeof buf, "\n%zu solves in %.3f s\n", sweep.size(), seconds);
  t += buf;
  return {j, t};
}

Report experiment_montecarlo(const ExperimentArgs& a) {
  const std::string pname = a.problem.empty() ? "testE" : a.problem;
  const reference::TestProblem tp = reference::test_problem(pname);
  const std::size_t n = a.n.value_or(tp.default_n);
  const int ls = a.support.value_or(tp.default_support);
  const NodeGrid grid = NodeGrid::uniform(n, tp.spec.lo, tp.spec.hi);
  const double sigma = a.sigma_g.value_or(reference::default_noise_sigma(tp, grid));
  const auto t0 = std::chrono::steady_clock::now();
  const auto mc = reference::monte_carlo(tp, n, ls, sigma, a.k, a.seed, scheme_from_string(a.scheme));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const double floor = 1e-10 * sigma;
  double max_bias = 0.0;
  double max_ratio_dev = 0.0;
  for (Eigen::Index i = 0; i < mc.bias.size(); ++i) {
    max_bias = std::max(max_bias, std::abs(mc.bias[i]));
    if (std::max(mc.predicted_sigma[i], mc.sample_sigma[i]) > floor) {
      max_ratio_dev = std::max(max_ratio_dev, std::abs(mc.predicted_sigma[i] / mc.sample_sigma[i] - 1.0));
    }
  }

  json j;
  j["experiment"] = "montecarlo";
  j["problem"] = tp.name;
  j["n"] = n;
  j["support_length"] = ls;
  j["scheme"] = a.scheme;
  j["iterations"] = mc.iterations;
  j["seed"] = mc.seed;
  j["sigma_g"] = mc.sigma_g;
  j["max_abs_bias"] = max_bias;
  j["max_sigma_ratio_deviation"] = max_ratio_dev;
  j["nodes"] = std::vector<double>(grid.nodes().begin(), grid.nodes().end());
  j["y_analytic"] = vec_json(mc.y_analytic);
  j["mean"] = vec_json(mc.mean);
  j["bias"] = vec_json(mc.bias);
  j["sample_sigma"] = vec_json(mc.sample_sigma);
  j["predicted_sigma"] = vec_json(mc.predicted_sigma);
  if (a.timing) j["timing"] = {{"seconds", seconds}};

  char buf[256];
  std::string t = "Monte Carlo on " + tp.name + ": k = " + std::to_string(mc.iterations) +
                  ", seed = " + std::to_string(mc.seed) + ", sigma_g = " + g17(sigma) + "\n\n";
  std::snprintf(buf, sizeof buf, "%10s %14s %14s %14s %14s\n", "x", "y", "bias", "sigma MC",
                "sigma pred");
  t += buf;
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    std::snprintf(buf, sizeof buf, "%10.4f %14.6e %14.4e %14.4e %14.4e\n", grid[i], mc.y_analytic[e],
                  mc.bias[e], mc.sample_sigma[e], mc.predicted_sigma[e]);
    t += buf;
  }
  std::snprintf(buf, sizeof buf, "\nmax |bias| %.4e, max |sigma_pred/sigma_MC - 1| %.4f, %.2f s\n",
                max_bias, max_ratio_dev, seconds);
  t += buf;
  return {j, t};
}

int cmd_experiment(const ExperimentArgs& a) {
  Report r;
  if (a.name == "sweep") {
    r = experiment_sweep(a);
  } else if (a.name == "montecarlo") {
    r = experiment_montecarlo(a);
  } else {
    r = experiment_test(a);
  }
  if (!a.out.empty()) {
    write_text(fs::path(a.out) / (a.name + ".json"), r.data.dump(2) + "\n");
    write_text(fs::path(a.out) / (a.name + ".txt"), r.table);
  }
  std::cout << (a.as_json ? r.data.dump(2) + "\n" : r.table);
  return kOk;
}

// --------------------------------------------------------------------------
// emit / verify

struct EmitArgs {
  std::string artifact;
  std::string dir;
  std::string precision = "double";
  std::string prefix = "rtinv";
  bool mac = false;
  bool no_sigma = false;
  std::size_t count = 8;
  std::uint64_t seed = 1;
  std::string problem;
};

int cmd_emit(const EmitArgs& a) {
  const PreparedSolver ps = load_artifact(a.artifact);
  codegen::EmitConfig cfg;
  cfg.precision = codegen::precision_from_string(a.precision);
  cfg.symbol_prefix = a.prefix;
  cfg.use_mac = a.mac;
  cfg.emit_sigma = !a.no_sigma;
  std::vector<Vector> extra;
  if (!a.problem.empty()) {
    const ProblemFile pf = load_problem(a.problem);
    if (pf.ode.forcing) {
      if (pf.grid.size() != ps.n()) {
        throw Error(ErrorCode::DimensionMismatch, a.problem + " has a different grid size");
      }
      extra.push_back(eval_vector(*pf.ode.forcing, ps.grid()));
    }
  }
  const auto vectors = codegen::emit_test_vectors(ps, a.count, a.seed, extra);
  codegen::write_kernel_dir(a.dir, ps, cfg, vectors);
  std::cout << "wrote " << a.prefix << "_solver.h, " << a.prefix << "_solver.c, harness.c, vectors.csv ("
            << vectors.vectors.size() << " vectors) and manifest.json to " << a.dir << "\n";
  return kOk;
}

struct VerifyArgs {
  std::string dir;
  std::string artifact;
  std::string cc;
  bool as_json = false;
};

int cmd_verify(const VerifyArgs& a) {
  const PreparedSolver ps = load_artifact(a.artifact);
  const std::string cc = a.cc.empty() ? codegen::default_compiler() : a.cc;
  if (!codegen::compiler_available(cc)) {
    std::cerr << "error: C compiler '" << cc << "' not found (set RTINV_CC or CC)\n";
    return kToolchain;
  }
  const codegen::VerifyReport rep = codegen::verify_kernel_dir(a.dir, ps, cc);
  if (a.as_json) {
    json j;
    j["ok"] = rep.ok();
    j["compiled"] = rep.compiled;
    j["constants_match"] = rep.constants_match;
    j["constant_diffs"] = rep.constant_diffs;
    json d = json::array();
    for (const auto& v : rep.deltas) {
      d.push_back({{"label", v.label}, {"delta_2norm", v.norm2}, {"max_abs_delta", v.max_abs},
                   {"within_tolerance", v.within_tolerance}});
    }
    j["vectors"] = d;
    if (!rep.compiled) j["compiler_output"] = rep.compiler_output;
    std::cout << j.dump(2) << "\n";
  } else {
    if (!rep.compiled) {
      std::cout << "kernel failed to compile:\n" << rep.compiler_output;
    }
    if (!rep.constants_match) {
      std::cout << "embedded constants differ from the artifact:\n";
      for (const auto& d : rep.constant_diffs) std::cout << "  " << d << "\n";
    }
    if (!rep.deltas.empty()) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%-14s %14s %14s  %s\n", "vector", "||dy||_2", "max|dy|", "status");
      std::cout << buf;
      for (const auto& v : rep.deltas) {
        std::snprintf(buf, sizeof buf, "%-14s %14.4e %14.4e  %s\n", v.label.c_str(), v.norm2, v.max_abs,
                      v.within_tolerance ? "ok" : "OUT OF TOLERANCE");
        std::cout << buf;
      }
    }
    std::cout << (rep.ok() ? "verify: ok\n" : "verify: FAILED\n");
  }
  return rep.ok() ? kOk : kMismatch;
}

// --------------------------------------------------------------------------
// dump-matrix / export-problem

struct DumpArgs {
  std::string problem;
  std::string what = "D";
  int order = 1;
  std::string out;
};

int cmd_dump(const DumpArgs& a) {
  const ProblemFile pf = load_problem(a.problem);
  Matrix m;
  if (a.what == "D") {
    m = build_diff_matrix(pf.grid, a.order, pf.support).entries;
  } else if (a.what == "L") {
    m = assemble_operator(pf.ode, pf.grid, pf.support, pf.scheme).entries;
  } else if (a.what == "C") {
    m = compile_constraints(pf.grid, pf.constraints, pf.support, pf.scheme).C;
  } else {
    const Built b = build(pf);
    m = prepare(b.L, b.cs).M();
  }
  if (a.out.empty()) {
    write_dense_matrix(std::cout, m);
  } else {
    std::ofstream os(a.out);
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + a.out);
    write_dense_matrix(os, m);
  }
  return kOk;
}

struct ExportArgs {
  std::string name;
  std::string out;
  std::optional<double> bound;
  std::optional<double> sigma_g;
};

int cmd_export(const ExportArgs& a) {
  const reference::TestProblem tp = reference::test_problem(a.name);
  ProblemFile pf{tp.name,
                 tp.spec,
                 NodeGrid::uniform(tp.default_n, tp.spec.lo, tp.spec.hi),
                 tp.constraints,
                 tp.default_support,
                 DerivativeScheme::Composed,
                 a.sigma_g,
                 tp.solution,
                 a.bound};
  const std::string text = problem_to_json(pf);
  if (a.out.empty() || a.out == "-") {
    std::cout << text;
  } else {
    write_text(a.out, text);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Precomputed real-time inverse solvers for linear ODEs with constraints"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 ok, 1 I/O or invalid input, 2 dimension mismatch, 3 ill-posed,\n"
      "4 inconsistent or dependent constraints, 5 C toolchain missing, 6 kernel mismatch.");

  std::function<int()> run;

  PrepareArgs pa;
  auto* prep = app.add_subcommand("prepare", "Build and save a run-time artifact from a problem file");
  prep->add_option("problem", pa.problem, "Problem file (JSON)")->required()->check(CLI::ExistingFile);
  prep->add_option("artifact", pa.artifact, "Output artifact path")->required();
  prep->add_flag("--keep-homogeneous", pa.keep_homogeneous,
                 "Store the map from constraint values to y_h in the artifact");
  prep->add_flag("--json", pa.as_json, "Print the report as JSON");
  prep->callback([&] { run = [&] { return cmd_prepare(pa); }; });

  SolveArgs sa;
  auto* sol = app.add_subcommand("solve", "Solve every row of a measurement CSV");
  sol->add_option("artifact", sa.artifact, "Prepared artifact")->required()->check(CLI::ExistingFile);
  sol->add_option("measurements", sa.measurements, "CSV, one row of n values per epoch")
      ->required()
      ->check(CLI::ExistingFile);
  sol->add_option("out", sa.out, "Output CSV")->required();
  sol->add_option("--sigma-g", sa.sigma_g, "Measurement noise standard deviation")
      ->check(CLI::NonNegativeNumber);
  sol->add_option("--ci", sa.ci, "Confidence half-widths, e.g. 0.95:20");
  sol->add_option("--with-operator", sa.with_operator,
                  "Problem file the artifact was prepared from; enables residuals and KS")
      ->check(CLI::ExistingFile);
  sol->add_option("--batch", sa.batch, "Rows per KS batch")->check(CLI::PositiveNumber);
  sol->add_option("--alpha", sa.alpha, "KS significance level")->check(CLI::Range(0.0, 1.0));
  sol->add_flag("--json", sa.as_json, "Print the summary as JSON");
  sol->callback([&] { run = [&] { return cmd_solve(sa); }; });

  ExperimentArgs ea;
  auto* exp = app.add_subcommand("experiment", "Run a reference experiment");
  exp->add_option("name", ea.name, "testA, testB, testC, sweep or montecarlo")
      ->required()
      ->check(CLI::IsMember({"testA", "testB", "testC", "sweep", "montecarlo"}));
  exp->add_option("--problem", ea.problem, "Built-in test problem")
      ->check(CLI::IsMember(reference::test_problem_names()));
  exp->add_option("--n", ea.n, "Number of nodes");
  exp->add_option("--support", ea.support, "Support length l_s");
  exp->add_option("--scheme", ea.scheme, "composed or direct")->check(CLI::IsMember({"composed", "direct"}));
  exp->add_option("--k", ea.k, "Monte Carlo iterations");
  exp->add_option("--seed", ea.seed, "Random seed");
  exp->add_option("--sigma-g", ea.sigma_g, "Noise level (default 1% of max |g|)");
  exp->add_option("--min-support", ea.min_support, "Sweep lower bound");
  exp->add_option("--max-support", ea.max_support, "Sweep upper bound");
  exp->add_option("--rtol", ea.rtol, "RK45 relative tolerance");
  exp->add_option("--atol", ea.atol, "RK45 absolute tolerance");
  exp->add_option("--out", ea.out, "Directory for <name>.json and <name>.txt");
  exp->add_flag("--json", ea.as_json, "Print JSON instead of the table");
  exp->add_flag("--timing", ea.timing, "Include wall-clock timings in the JSON report");
  exp->callback([&] { run = [&] { return cmd_experiment(ea); }; });

  EmitArgs ma;
  auto* emit = app.add_subcommand("emit", "Generate a C99 kernel, harness and test vectors");
  emit->add_option("artifact", ma.artifact, "Prepared artifact")->required()->check(CLI::ExistingFile);
  emit->add_option("dir", ma.dir, "Output directory")->required();
  emit->add_option("--precision", ma.precision, "double or single")->check(CLI::IsMember({"double", "single"}));
  emit->add_option("--prefix", ma.prefix, "C symbol prefix");
  emit->add_flag("--mac", ma.mac, "Multiply-accumulate form of the inner loop");
  emit->add_flag("--no-sigma", ma.no_sigma, "Omit s and the sigma function");
  emit->add_option("--count", ma.count, "Random test vectors")->check(CLI::PositiveNumber);
  emit->add_option("--seed", ma.seed, "Random seed for test vectors");
  emit->add_option("--problem", ma.problem, "Problem file whose forcing is added as a vector")
      ->check(CLI::ExistingFile);
  emit->callback([&] { run = [&] { return cmd_emit(ma); }; });

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "Compile and run an emitted kernel against its artifact");
  ver->add_option("dir", va.dir, "Kernel directory written by emit")->required()->check(CLI::ExistingDirectory);
  ver->add_option("artifact", va.artifact, "Prepared artifact")->required()->check(CLI::ExistingFile);
  ver->add_option("--cc", va.cc, "C compiler (default: $RTINV_CC, $CC, cc)");
  ver->add_flag("--json", va.as_json, "Print the report as JSON");
  ver->callback([&] { run = [&] { return cmd_verify(va); }; });

  DumpArgs da;
  auto* dump = app.add_subcommand("dump-matrix", "Print a matrix as dense row-major text");
  dump->add_option("problem", da.problem, "Problem file")->required()->check(CLI::ExistingFile);
  dump->add_option("--what", da.what, "D (differentiation), L, C or M")->check(CLI::IsMember({"D", "L", "C", "M"}));
  dump->add_option("--order", da.order, "Derivative order for D")->check(CLI::PositiveNumber);
  dump->add_option("--out", da.out, "Output file (default stdout)");
  dump->callback([&] { run = [&] { return cmd_dump(da); }; });

  ExportArgs xa;
  auto* exq = app.add_subcommand("export-problem", "Write a built-in test problem as a problem file");
  exq->add_option("name", xa.name, "Built-in test problem")
      ->required()
      ->check(CLI::IsMember(reference::test_problem_names()));
  exq->add_option("out", xa.out, "Output path (default stdout)");
  exq->add_option("--bound", xa.bound, "reference.max_error_2norm");
  exq->add_option("--sigma-g", xa.sigma_g, "noise.sigma_g");
  exq->callback([&] { run = [&] { return cmd_export(xa); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // usage errors and missing input files are both invalid input
    return app.exit(e) == 0 ? kOk : kIo;
  }

  try {
    return run();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
}
