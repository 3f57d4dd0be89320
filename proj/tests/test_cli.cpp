#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <random>

#include "helpers.hpp"
#include "rtinv/artifact_io.hpp"
#include "rtinv/codegen.hpp"
#include "rtinv/problem_file.hpp"
#include "rtinv/reference.hpp"

using namespace rtinv;
using nlohmann::json;

namespace {

const std::string kCli = testutil::quote(RTINV_CLI_PATH);

int cli(const std::string& args) { return testutil::run(kCli + " " + args + " > /dev/null 2>&1"); }

// stdout of a CLI call and its exit status
std::string cli_output(const std::string& args, int* status = nullptr) {
  FILE* p = popen((kCli + " " + args + " 2>/dev/null").c_str(), "r");
  REQUIRE(p != nullptr);
  std::string out;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, got);
  const int rc = pclose(p);
  if (status != nullptr) *status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return out;
}

std::string fx(const std::string& name) { return testutil::quote(testutil::fixture(name).string()); }
std::string at(const testutil::TempDir& d, const std::string& name) {
  return testutil::quote((d / name).string());
}

std::string csv_row(const Vector& v) {
  std::string s;
  char buf[32];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    s += (i ? "," : "") + std::string(buf);
  }
  return s + "\n";
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& p) {
  std::istringstream is(testutil::read_file(p));
  std::string line;
  std::getline(is, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("prepare exit codes") {
    testutil::TempDir d("prep");
    CHECK(cli("prepare " + fx("testA") + " " + at(d, "a.json")) == 0);
    CHECK(std::filesystem::exists(d / "a.json"));
    CHECK(cli("prepare " + fx("bad_underconstrained") + " " + at(d, "b.json")) == 3);
    CHECK(cli("prepare " + fx("bad_contradictory") + " " + at(d, "c.json")) == 4);
    testutil::write_file(d / "broken.json", "{\"ode\": 1}");
    CHECK(cli("prepare " + at(d, "broken.json") + " " + at(d, "x.json")) == 1);
    CHECK(cli("prepare") != 0);
    CHECK(cli("nosuchcommand") != 0);

    int rc = 0;
    const json j = json::parse(cli_output("prepare " + fx("testE") + " " + at(d, "e.json") + " --json", &rc));
    CHECK(rc == 0);
    CHECK(j["status"] == "ok");
    CHECK(j["n"] == 21);
    CHECK(j["report"]["well_posed"] == true);
    const json bad =
        json::parse(cli_output("prepare " + fx("bad_underconstrained") + " " + at(d, "u.json") + " --json", &rc));
    CHECK(rc == 3);
    CHECK(bad["status"] == "ill_posed");
    CHECK(bad["report"]["null_lf_dimension"].get<int>() >= 1);
  }

  TEST_CASE("solve") {
    testutil::TempDir d("solve");
    REQUIRE(cli("prepare " + fx("testE") + " " + at(d, "e.json")) == 0);
    const ProblemFile pf = load_problem(testutil::fixture("testE"));
    const Vector g = eval_vector(*pf.ode.forcing, pf.grid);
    const Vector ya = eval_vector(*pf.solution, pf.grid);

    testutil::write_file(d / "m.csv", csv_row(Vector::Zero(21)) + csv_row(g));
    REQUIRE(cli("solve " + at(d, "e.json") + " " + at(d, "m.csv") + " " + at(d, "y.csv")) == 0);
    const auto rows = read_csv(d / "y.csv");
    REQUIRE(rows.size() == 2);
    const PreparedSolver ps = load_artifact(d / "e.json");
    for (std::size_t i = 0; i < 21; ++i) CHECK(rows[0][i] == ps.y_h()[static_cast<Eigen::Index>(i)]);
    double err = 0.0;
    for (std::size_t i = 0; i < 21; ++i) err += std::pow(rows[1][i] - ya[static_cast<Eigen::Index>(i)], 2);
    CHECK(std::sqrt(err) <= 1e-9);

    // a header row is skipped
    std::string header;
    for (int i = 0; i < 21; ++i) header += (i ? ",g_" : "g_") + std::to_string(i);
    testutil::write_file(d / "h.csv", header + "\n" + csv_row(g));
    CHECK(cli("solve " + at(d, "e.json") + " " + at(d, "h.csv") + " " + at(d, "yh.csv")) == 0);
    CHECK(read_csv(d / "yh.csv").size() == 1);

    testutil::write_file(d / "short.csv", csv_row(Vector::Zero(20)));
    CHECK(cli("solve " + at(d, "e.json") + " " + at(d, "short.csv") + " " + at(d, "z.csv")) == 2);
    testutil::write_file(d / "nan.csv", "nan" + csv_row(Vector::Zero(20)).insert(0, ","));
    CHECK(cli("solve " + at(d, "e.json") + " " + at(d, "nan.csv") + " " + at(d, "z.csv")) == 2);
    CHECK(cli("solve " + at(d, "e.json") + " " + at(d, "missing.csv") + " " + at(d, "z.csv")) == 1);
  }

  TEST_CASE("solve with uncertainty columns") {
    testutil::TempDir d("sigma");
    REQUIRE(cli("prepare " + fx("testE") + " " + at(d, "e.json")) == 0);
    testutil::write_file(d / "m.csv", csv_row(Vector::Ones(21)));
    REQUIRE(cli("solve " + at(d, "e.json") + " " + at(d, "m.csv") + " " + at(d, "y.csv") +
                " --sigma-g 0.5 --ci 0.95:20") == 0);
    const auto rows = read_csv(d / "y.csv");
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].size() == 63);
    const PreparedSolver ps = load_artifact(d / "e.json");
    for (std::size_t i = 0; i < 21; ++i) {
      const double s = 0.5 * ps.s()[static_cast<Eigen::Index>(i)];
      CHECK(rows[0][21 + i] == doctest::Approx(s));
      CHECK(rows[0][42 + i] == doctest::Approx(2.0859634472658644 * s));
    }
    CHECK(cli("solve " + at(d, "e.json") + " " + at(d, "m.csv") + " " + at(d, "y.csv") + " --ci 0.95:20") == 1);
  }

  TEST_CASE("solve throughput") {
    testutil::TempDir d("rate");
    REQUIRE(cli("prepare " + fx("testE") + " " + at(d, "e.json")) == 0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::string csv;
    for (int r = 0; r < 10000; ++r) {
      Vector g(21);
      for (auto& v : g) v = u(rng);
      csv += csv_row(g);
    }
    testutil::write_file(d / "m.csv", csv);
    const auto t0 = std::chrono::steady_clock::now();
    CHECK(cli("solve " + at(d, "e.json") + " " + at(d, "m.csv") + " " + at(d, "y.csv")) == 0);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(secs < 1.0);
    CHECK(read_csv(d / "y.csv").size() == 10000);
  }

  TEST_CASE("residual diagnostics") {
    testutil::TempDir d("ks");
    REQUIRE(cli("prepare " + fx("testE") + " " + at(d, "e.json")) == 0);
    const ProblemFile pf = load_problem(testutil::fixture("testE"));
    const Vector g = eval_vector(*pf.ode.forcing, pf.grid);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd(0.0, 0.01);
    std::string csv;
    for (int r = 0; r < 200; ++r) {
      Vector gn = g;
      for (auto& v : gn) v += nd(rng);
      csv += csv_row(gn);
    }
    testutil::write_file(d / "m.csv", csv);
    int rc = 0;
    const json j = json::parse(cli_output("solve " + at(d, "e.json") + " " + at(d, "m.csv") + " " +
                                              at(d, "y.csv") + " --with-operator " + fx("testE") +
                                              " --batch 100 --json",
                                          &rc));
    CHECK(rc == 0);
    CHECK(j["rows"] == 200);
    REQUIRE(j["ks_batches"].size() == 2);
    for (const auto& b : j["ks_batches"]) {
      CHECK(b["rows"] == 100);
      CHECK(b["ks_statistic"].get<double>() > 0.0);
      CHECK(b["gaussian"].is_boolean());
    }
    const auto rows = read_csv(d / "y.csv");
    REQUIRE(rows.size() == 200);
    CHECK(rows[0].size() == 22);
    CHECK(rows[0][21] > 0.0);
    // an operator from another problem is refused
    CHECK(cli("solve " + at(d, "e.json") + " " + at(d, "m.csv") + " " + at(d, "y.csv") +
              " --with-operator " + fx("testA")) != 0);
  }

  TEST_CASE("experiments") {
    testutil::TempDir d("exp");
    int rc = 0;
    const json a = json::parse(cli_output("experiment testA --json", &rc));
    CHECK(rc == 0);
    CHECK(a["error_2norm"].get<double>() <= 1e-6);
    CHECK(a["n"] == 77);
    CHECK_FALSE(a.contains("timing"));
    CHECK(json::parse(cli_output("experiment testA --json --timing"))["timing"]["prepare_seconds"] >= 0.0);

    const json s = json::parse(cli_output("experiment sweep --problem testC --json", &rc));
    CHECK(rc == 0);
    CHECK(s["argmin_support_length"] == 15);
    CHECK(s["points"].size() == 12);
    CHECK(s["min_relative_error"].get<double>() <= 1e-5);

    const std::string mc_args = "experiment montecarlo --problem testE --k 300 --seed 4 --json";
    const std::string first = cli_output(mc_args, &rc);
    CHECK(rc == 0);
    CHECK(cli_output(mc_args) == first);
    const json mc = json::parse(first);
    CHECK(mc["iterations"] == 300);
    CHECK(mc["bias"].size() == 21);

    CHECK(cli("experiment testB --out " + at(d, "out")) == 0);
    CHECK(std::filesystem::exists(d / "out" / "testB.json"));
    CHECK(std::filesystem::exists(d / "out" / "testB.txt"));
    CHECK(json::parse(testutil::read_file(d / "out" / "testB.json"))["error_2norm"].get<double>() <= 5e-3);
    CHECK(cli("experiment nosuch") != 0);
  }

  TEST_CASE("emit and verify") {
    testutil::TempDir d("emit");
    REQUIRE(cli("prepare " + fx("testC_pil") + " " + at(d, "c.json")) == 0);
    REQUIRE(cli("emit " + at(d, "c.json") + " " + at(d, "k") + " --problem " + fx("testC_pil")) == 0);
    CHECK(std::filesystem::exists(d / "k" / "rtinv_solver.c"));
    CHECK(std::filesystem::exists(d / "k" / "harness.c"));
    CHECK(std::filesystem::exists(d / "k" / "manifest.json"));
    CHECK(read_csv(d / "k" / "vectors.csv").size() == 9);
    CHECK(cli("emit " + at(d, "c.json") + " " + at(d, "k2") + " --prefix 9bad") != 0);

    if (!codegen::compiler_available(codegen::default_compiler())) {
      MESSAGE("no C compiler, skipping verify");
      return;
    }
    int rc = 0;
    const json v = json::parse(cli_output("verify " + at(d, "k") + " " + at(d, "c.json") + " --json", &rc));
    CHECK(rc == 0);
    CHECK(v["ok"] == true);
    CHECK(v["vectors"].size() == 9);
    CHECK(testutil::run("RTINV_CC=rtinv-no-such-cc " + kCli + " verify " + at(d, "k") + " " + at(d, "c.json") +
                        " > /dev/null 2>&1") == 5);

    std::string src = testutil::read_file(d / "k" / "rtinv_solver.c");
    const auto pos = src.find("y[i] = acc + rtinv_y_h[i];");
    REQUIRE(pos != std::string::npos);
    src.replace(pos, 26, "y[i] = acc + 2 * rtinv_y_h[i];");
    testutil::write_file(d / "k" / "rtinv_solver.c", src);
    CHECK(cli("verify " + at(d, "k") + " " + at(d, "c.json")) == 6);
  }

  TEST_CASE("dump-matrix") {
    testutil::TempDir d("dump");
    CHECK(cli("dump-matrix " + fx("testC_pil") + " --what D --order 1 --out " + at(d, "d.txt")) == 0);
    std::istringstream is(testutil::read_file(d / "d.txt"));
    std::string line;
    int lines = 0;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      double v = 0.0, sum = 0.0;
      int cols = 0;
      while (ls >> v) {
        sum += v;
        ++cols;
      }
      CHECK(cols == 10);
      CHECK(std::abs(sum) <= 1e-10);
      ++lines;
    }
    CHECK(lines == 10);
  }

  TEST_CASE("every fixture round-trips within its bound") {
    for (const auto& name : reference::test_problem_names()) {
      testutil::TempDir d("rt");
      const ProblemFile pf = load_problem(testutil::fixture(name));
      REQUIRE(pf.max_error_2norm);
      REQUIRE(cli("prepare " + fx(name) + " " + at(d, "a.json")) == 0);
      testutil::write_file(d / "m.csv", csv_row(eval_vector(*pf.ode.forcing, pf.grid)));
      REQUIRE(cli("solve " + at(d, "a.json") + " " + at(d, "m.csv") + " " + at(d, "y.csv")) == 0);
      const auto rows = read_csv(d / "y.csv");
      REQUIRE(rows.size() == 1);
      const Vector ya = eval_vector(*pf.solution, pf.grid);
      double err = 0.0;
      for (std::size_t i = 0; i < pf.grid.size(); ++i) {
        err += std::pow(rows[0][i] - ya[static_cast<Eigen::Index>(i)], 2);
      }
      INFO(name);
      CHECK(std::sqrt(err) <= *pf.max_error_2norm);
    }
  }

  TEST_CASE("export-problem reproduces the fixtures") {
    for (const auto& name : reference::test_problem_names()) {
      const ProblemFile fixture = load_problem(testutil::fixture(name));
      std::string args = "export-problem " + name;
      char buf[64];
      std::snprintf(buf, sizeof buf, " --bound %.17g", *fixture.max_error_2norm);
      args += buf;
      if (fixture.sigma_g) {
        std::snprintf(buf, sizeof buf, " --sigma-g %.17g", *fixture.sigma_g);
        args += buf;
      }
      INFO(name);
      CHECK(cli_output(args) == testutil::read_file(testutil::fixture(name)));
    }
  }
}
