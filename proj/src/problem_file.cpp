#include "rtinv/problem_file.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rtinv/errors.hpp"

namespace rtinv {
namespace {

using nlohmann::json;

[[noreturn]] void schema(const std::string& what) { throw Error(ErrorCode::SchemaError, what); }

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) schema(where + ": missing field '" + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) schema(where + " must be a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) schema(where + " must be an integer");
  return j.get<int>();
}

Expression expression(const json& j, const std::string& where) {
  if (j.is_number()) return Expression::constant(j.get<double>());
  if (!j.is_string()) schema(where + " must be an expression string");
  try {
    return Expression::parse(j.get<std::string>());
  } catch (const Error& e) {
    schema(where + ": " + e.what());
  }
}

NodeGrid grid_from(const json& g) {
  if (!g.is_object()) schema("grid must be an object");
  if (g.contains("nodes")) {
    const json& nodes = g.at("nodes");
    if (!nodes.is_array()) schema("grid.nodes must be an array");
    std::vector<double> x;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      x.push_back(number(nodes[i], "grid.nodes[" + std::to_string(i) + "]"));
    }
    try {
      return NodeGrid(std::move(x));
    } catch (const Error& e) {
      schema(std::string("grid.nodes: ") + e.what());
    }
  }
  const int n = integer(require(g, "n", "grid"), "grid.n");
  const double lo = number(require(g, "lo", "grid"), "grid.lo");
  const double hi = number(require(g, "hi", "grid"), "grid.hi");
  if (g.contains("spacing") && g.at("spacing") != "uniform") {
    schema("grid.spacing must be \"uniform\"");
  }
  if (n < 2) schema("grid.n must be >= 2");
  if (!(hi > lo)) schema("grid.hi must exceed grid.lo");
  return NodeGrid::uniform(static_cast<std::size_t>(n), lo, hi);
}

}  // namespace

ProblemFile parse_problem(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    schema(std::string("problem file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) schema("problem file must be a JSON object");

  const json& ode = require(j, "ode", "problem");
  const int order = integer(require(ode, "order", "ode"), "ode.order");
  if (order < 0) schema("ode.order must be >= 0");
  const json& cj = require(ode, "coefficients", "ode");
  if (!cj.is_array() || cj.size() != static_cast<std::size_t>(order) + 1) {
    schema("ode.coefficients must list order+1 expressions");
  }

  ProblemFile pf{j.value("name", std::string("problem")), OdeSpec{}, grid_from(require(j, "grid", "problem")),
                 {}, 0, DerivativeScheme::Composed, std::nullopt, std::nullopt, std::nullopt};
  pf.ode.order = order;
  for (std::size_t i = 0; i < cj.size(); ++i) {
    pf.ode.coefficients.push_back(expression(cj[i], "ode.coefficients[" + std::to_string(i) + "]"));
  }
  if (ode.contains("forcing")) pf.ode.forcing = expression(ode.at("forcing"), "ode.forcing");
  pf.ode.lo = pf.grid.lo();
  pf.ode.hi = pf.grid.hi();
  if (ode.contains("interval")) {
    const json& iv = ode.at("interval");
    if (!iv.is_array() || iv.size() != 2) schema("ode.interval must be [lo, hi]");
    pf.ode.lo = number(iv[0], "ode.interval[0]");
    pf.ode.hi = number(iv[1], "ode.interval[1]");
  }

  const json& cons = require(j, "constraints", "problem");
  if (!cons.is_array()) schema("constraints must be an array");
  for (std::size_t k = 0; k < cons.size(); ++k) {
    const std::string where = "constraints[" + std::to_string(k) + "]";
    pf.constraints.push_back({integer(require(cons[k], "order", where), where + ".order"),
                              number(require(cons[k], "location", where), where + ".location"),
                              number(require(cons[k], "value", where), where + ".value")});
    if (pf.constraints.back().order < 0) schema(where + ".order must be >= 0");
  }

  const json& disc = require(j, "discretization", "problem");
  pf.support = integer(require(disc, "support_length", "discretization"),
                       "discretization.support_length");
  if (disc.contains("scheme")) {
    if (!disc.at("scheme").is_string()) schema("discretization.scheme must be a string");
    try {
      pf.scheme = scheme_from_string(disc.at("scheme").get<std::string>());
    } catch (const Error&) {
      schema("discretization.scheme must be \"composed\" or \"direct\"");
    }
  }

  if (j.contains("noise")) {
    const json& nz = j.at("noise");
    if (nz.contains("sigma_g")) {
      pf.sigma_g = number(nz.at("sigma_g"), "noise.sigma_g");
      if (*pf.sigma_g < 0) schema("noise.sigma_g must be >= 0");
    }
  }
  if (j.contains("reference")) {
    const json& ref = j.at("reference");
    pf.solution = expression(require(ref, "solution", "reference"), "reference.solution");
    if (ref.contains("max_error_2norm")) {
      pf.max_error_2norm = number(ref.at("max_error_2norm"), "reference.max_error_2norm");
    }
  }
  return pf;
}

ProblemFile load_problem(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_problem(ss.str());
}

std::string problem_to_json(const ProblemFile& pf) {
  nlohmann::ordered_json j;
  j["name"] = pf.name;
  nlohmann::ordered_json ode;
  ode["order"] = pf.ode.order;
  ode["coefficients"] = nlohmann::ordered_json::array();
  for (const Expression& c : pf.ode.coefficients) ode["coefficients"].push_back(c.source());
  if (pf.ode.forcing) ode["forcing"] = pf.ode.forcing->source();
  if (pf.ode.lo != pf.grid.lo() || pf.ode.hi != pf.grid.hi()) ode["interval"] = {pf.ode.lo, pf.ode.hi};
  j["ode"] = ode;

  const NodeGrid uniform = NodeGrid::uniform(pf.grid.size(), pf.grid.lo(), pf.grid.hi());
  if (uniform == pf.grid) {
    j["grid"] = {{"n", pf.grid.size()}, {"lo", pf.grid.lo()}, {"hi", pf.grid.hi()},
                 {"spacing", "uniform"}};
  } else {
    const auto x = pf.grid.nodes();
    j["grid"] = {{"nodes", std::vector<double>(x.begin(), x.end())}};
  }

  j["constraints"] = nlohmann::ordered_json::array();
  for (const Constraint& c : pf.constraints) {
    nlohmann::ordered_json cj;
    cj["order"] = c.order;
    cj["location"] = c.location;
    cj["value"] = c.value;
    j["constraints"].push_back(cj);
  }
  nlohmann::ordered_json disc;
  disc["support_length"] = pf.support;
  disc["scheme"] = to_string(pf.scheme);
  j["discretization"] = disc;
  if (pf.sigma_g) j["noise"] = {{"sigma_g", *pf.sigma_g}};
  if (pf.solution) {
    nlohmann::ordered_json ref;
    ref["solution"] = pf.solution->source();
    if (pf.max_error_2norm) ref["max_error_2norm"] = *pf.max_error_2norm;
    j["reference"] = ref;
  }
  return j.dump(2) + "\n";
}

}  // namespace rtinv
