#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rerand/cli.hpp"
#include "rerand/harness.hpp"

using namespace rerand;
using namespace rerand::cli;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "rerand_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto path = scratch_dir() / name;
  std::ofstream(path) << text;
  return path.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// 20 units, two covariates, deterministic values.
std::string covariate_csv() {
  Rng rng(RngSpec{77, 0});
  std::ostringstream out;
  out << "id,x1,x2\n";
  for (int i = 0; i < 20; ++i) out << "u" << i << ',' << rng.normal() << ',' << rng.normal() << '\n';
  return out.str();
}

int run_capture(const RunConfig& c, std::string& out, std::string& err) {
  std::ostringstream o;
  std::ostringstream e;
  const int code = run(c, o, e);
  out = o.str();
  err = e.str();
  return code;
}

}  // namespace

TEST_CASE("seeded designs are byte-identical", "[cli]") {
  RunConfig c;
  c.subcommand = "design";
  c.covariates = write_file("x.csv", covariate_csv());
  c.p_a = 0.1;
  c.seed = 42;
  std::string a, b, err;
  REQUIRE(run_capture(c, a, err) == exit_ok);
  REQUIRE(run_capture(c, b, err) == exit_ok);
  REQUIRE(a == b);
  const auto j = nlohmann::json::parse(a);
  REQUIRE(j["proposals"].get<int>() >= 1);
  REQUIRE(j["ids"][0] == "u0");
  c.seed = 43;
  std::string other;
  REQUIRE(run_capture(c, other, err) == exit_ok);
  REQUIRE(other != a);
}

TEST_CASE("design, test and ci round trip", "[cli]") {
  RunConfig design;
  design.subcommand = "design";
  design.covariates = write_file("x.csv", covariate_csv());
  design.p_a = 0.2;
  design.seed = 5;
  design.out = (scratch_dir() / "design.json").string();
  design.assignment_out = (scratch_dir() / "w.csv").string();
  std::string out, err;
  REQUIRE(run_capture(design, out, err) == exit_ok);
  const auto dj = nlohmann::json::parse(read_file(design.out));
  REQUIRE(read_file(design.assignment_out).rfind("id,w\nu0,", 0) == 0);

  std::ostringstream y;
  y << "id,y\n";
  for (int i = 19; i >= 0; --i) y << "u" << i << ',' << (i % 3) + dj["assignment"][static_cast<std::size_t>(i)].get<int>() << '\n';
  RunConfig test;
  test.subcommand = "test";
  test.covariates = design.covariates;
  test.design = design.out;
  test.outcomes = write_file("y.csv", y.str());
  test.n_sim = 499;
  REQUIRE(run_capture(test, out, err) == exit_ok);
  const auto tj = nlohmann::json::parse(out);
  REQUIRE(tj["p_value"].get<double>() > 0.0);
  REQUIRE(tj["p_value"].get<double>() <= 1.0);

  RunConfig ci = test;
  ci.subcommand = "ci";
  REQUIRE(run_capture(ci, out, err) == exit_ok);
  const auto cj = nlohmann::json::parse(out);
  REQUIRE(cj["lower"].get<double>() <= cj["estimate"].get<double>());
  REQUIRE(cj["upper"].get<double>() >= cj["estimate"].get<double>());

  SECTION("a criterion the design fails is refused") {
    RunConfig strict = test;
    strict.a = 0.0;
    REQUIRE(run_capture(strict, out, err) == exit_validation);
    REQUIRE(err.find("criterion mismatch") != std::string::npos);
  }
}

TEST_CASE("validation errors map to exit code 2", "[cli]") {
  std::string out, err;
  RunConfig c;
  c.subcommand = "design";
  c.covariates = write_file("header_only.csv", "x1,x2\n");
  REQUIRE(run_capture(c, out, err) == exit_validation);
  REQUIRE(err.find("no data rows") != std::string::npos);

  c.covariates = write_file("x.csv", covariate_csv());
  c.criterion = R"({"type":"nope"})";
  REQUIRE(run_capture(c, out, err) == exit_validation);

  c.criterion.clear();
  c.n_treated = 20;
  REQUIRE(run_capture(c, out, err) == exit_validation);
}

TEST_CASE("infeasible criterion maps to exit code 3", "[cli]") {
  RunConfig c;
  c.subcommand = "design";
  c.covariates = write_file("x.csv", covariate_csv());
  c.a = 0.0;
  c.max_proposals = 1000;
  std::string out, err;
  REQUIRE(run_capture(c, out, err) == exit_budget);
  REQUIRE(err.find("warning: threshold a = 0") != std::string::npos);
}

TEST_CASE("interactions flag widens the covariate set", "[cli]") {
  RunConfig c;
  c.subcommand = "calibrate";
  c.covariates = write_file("x.csv", covariate_csv());
  c.interactions = true;
  c.p_a = 0.1;
  std::string out, err;
  REQUIRE(run_capture(c, out, err) == exit_ok);
  REQUIRE(nlohmann::json::parse(out)["k"] == 3);
}

TEST_CASE("theory command", "[cli]") {
  RunConfig c;
  c.subcommand = "theory";
  c.k = 2;
  c.p_a = 0.1;
  c.r_squared = 0.5;
  std::string out, err;
  REQUIRE(run_capture(c, out, err) == exit_ok);
  const auto j = nlohmann::json::parse(out);
  REQUIRE(j["v_a"].get<double>() == Catch::Approx(0.0518).margin(1e-4));
  REQUIRE(j["priv_covariate"].get<double>() == Catch::Approx(94.8).margin(0.05));
  REQUIRE(j["priv_tau"].get<double>() == Catch::Approx(47.4).margin(0.05));

  c.grid = "covariate";
  REQUIRE(run_capture(c, out, err) == exit_ok);
  REQUIRE(out.rfind("k,p_a,", 0) == 0);
}

TEST_CASE("theory grid agrees with Monte Carlo at three points", "[cli]") {
  for (const auto& [k, p] : std::vector<std::pair<std::size_t, double>>{{1, 0.1}, {2, 0.3}, {4, 0.05}}) {
    const auto r = harness::h2_priv_per_covariate(100, k, p, 100000, RngSpec{31, k}, 1);
    INFO(harness::report_to_table(r));
    REQUIRE(r.row("PRIV covariate 1").pass);
  }
}

TEST_CASE("enumerate command", "[cli]") {
  RunConfig c;
  c.subcommand = "enumerate";
  c.covariates = std::string(RERAND_DATA_DIR) + "/counterexample_x.csv";
  c.n_treated = 2;
  c.criterion = R"({"type":"user","name":"zero_mean_difference"})";
  std::string out, err;
  REQUIRE(run_capture(c, out, err) == exit_ok);
  const auto j = nlohmann::json::parse(out);
  REQUIRE(j["assignments"] == nlohmann::json::parse("[[1,0,1]]"));
}
