#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hamdrift_cli/config.hpp"
#include "hamdrift_cli/runner.hpp"

using namespace hamdrift;
using namespace hamdrift::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  int rc = run_cli(args, out, err);
  if (out_text) *out_text = out.str() + err.str();
  return rc;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "hamdrift_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kValidConfig = R"({
  "version": 1,
  "system": {
    "h0": "1 - cos(x) + y^2/2",
    "q": 2,
    "e0": 1.8,
    "f_terms": [
      {"k": 1, "expr": "alpha*x^2*y"},
      {"k": 2, "expr": "lam*y"}
    ],
    "params": {"alpha": -2.0, "lam": 0.4}
  },
  "chart": {"n_e": 24, "n_phi": 128},
  "averaging": {"order": 2},
  "sim": {"seeds": [[0.5, 0.0]], "t_end": 100.0, "tol": 1e-9}
})";

}  // namespace

TEST_CASE("config parsing accepts the documented schema") {
  RunConfig cfg = parse_config_json(kValidConfig);
  CHECK(cfg.q == 2);
  CHECK(cfg.e0 == 1.8);
  CHECK(cfg.f_terms.size() == 2);
  CHECK(cfg.n_e == 24);
  CHECK(cfg.order == 2);
  CHECK(cfg.seeds.size() == 1);
  PerturbedSystem sys = cfg.build_system();
  CHECK(sys.q() == 2);
}

TEST_CASE("config validation reports JSON-pointer paths") {
  auto expect_pointer = [](const std::string& json, const std::string& ptr) {
    try {
      RunConfig cfg = parse_config_json(json);
      cfg.build_system();
      FAIL_CHECK("expected a ConfigError at " << ptr);
    } catch (const ConfigError& e) {
      CHECK(e.pointer == ptr);
    }
  };

  expect_pointer(R"({"system": {}})", "/version");
  expect_pointer(R"({"version": 2, "system": {}})", "/version");
  expect_pointer(
      R"({"version": 1, "system": {"h0": "x^2", "e0": 1.0}})", "/system/q");
  expect_pointer(
      R"({"version": 1,
          "system": {"h0": "(x^2+y^2)/2", "q": 0, "e0": 1.0}})",
      "/system/q");
  expect_pointer(
      R"({"version": 1,
          "system": {"h0": "(x^2+y^2)/2", "q": 2, "e0": 1.0,
                     "f_terms": [{"k": 0, "expr": "y"}]}})",
      "/system/f_terms/0/k");
  expect_pointer(
      R"({"version": 1,
          "system": {"h0": "(x^2+y^2)/2", "q": 2, "e0": 1.0,
                     "f_terms": [{"k": 1, "expr": "y"}, {"k": 1, "expr": "x"}]}})",
      "/system/f_terms/1/k");
  expect_pointer(
      R"({"version": 1,
          "system": {"h0": "(x^2+y^2)/2", "q": 2, "e0": 1.0,
                     "f_terms": [{"k": 1, "expr": "lam*y"}]}})",
      "/system/f_terms/0/expr");  // unbound parameter
  expect_pointer(
      R"({"version": 1,
          "system": {"h0": "(x^2+y^2)/2", "q": 2, "e0": 1.0},
          "averaging": {"order": 4}})",
      "/averaging/order");
  expect_pointer(
      R"({"version": 1,
          "system": {"h0": "(x^2+y^2", "q": 2, "e0": 1.0}})",
      "/system/h0");  // parse error carried to the field
}

TEST_CASE("a perturbation that moves the fixed point is rejected with the "
          "offending term") {
  std::string bad = R"({
    "version": 1,
    "system": {"h0": "(x^2+y^2)/2", "q": 2, "e0": 1.0,
               "f_terms": [{"k": 1, "expr": "y*0 + lam"}],
               "params": {"lam": 0.3}}
  })";
  try {
    parse_config_json(bad).build_system();
    FAIL_CHECK("expected rejection");
  } catch (const ConfigError& e) {
    CHECK(e.pointer == "/system/f_terms/0");
    CHECK(std::string(e.what()).find("vanish") != std::string::npos);
  }
}

TEST_CASE("builtin examples expand to valid configurations") {
  for (const std::string& id : builtin_example_ids()) {
    RunConfig cfg = builtin_example(id);
    PerturbedSystem sys = cfg.build_system();
    CHECK(sys.e0() > 0);
  }

  RunConfig ex1 = builtin_example("ex1-pendulum-linear");
  CHECK(ex1.h0 == "1 - cos(x) + y^2/2");
  CHECK(ex1.q == 4);
  REQUIRE(ex1.f_terms.size() == 2);
  CHECK(ex1.f_terms[0].k == 1);
  CHECK(ex1.f_terms[1].k == 2);

  RunConfig ex1n6 = builtin_example("ex1-pendulum-linear", {{"n", 6}});
  CHECK(ex1n6.f_terms[1].k == 6);

  // the decay exponent is rationalized into (n, q)
  RunConfig wkb = builtin_example("wkb-linear", {{"kappa", 1.5}});
  CHECK(wkb.q == 2);
  CHECK(wkb.f_terms[0].k == 3);

  CHECK_THROWS_AS(builtin_example("nope"), ConfigError);
  CHECK_THROWS_AS(builtin_example("wkb-linear", {{"kappa", 0.123456}}),
                  ConfigError);
  CHECK_THROWS_AS(builtin_example("ex2-pendulum-x2y", {{"zeta", 1.0}}),
                  ConfigError);
}

TEST_CASE("param list parsing") {
  ParamEnv env = parse_param_list({"lam=-1.5,mu=0.25", "kap=3"});
  CHECK(env.at("lam") == -1.5);
  CHECK(env.at("mu") == 0.25);
  CHECK(env.at("kap") == 3.0);
  CHECK_THROWS_AS(parse_param_list({"lam"}), ConfigError);
  CHECK_THROWS_AS(parse_param_list({"lam=abc"}), ConfigError);
}

TEST_CASE("cli: usage errors exit with code 1") {
  std::string text;
  CHECK(run({"classify"}, &text) == 1);
  CHECK(run({"classify", "--example", "nope", "--out", "/tmp/hd_nope"},
            &text) == 1);
  CHECK(run({"classify", "--example", "ex2-pendulum-x2y", "--config", "x"},
            &text) == 1);
}

TEST_CASE("cli: chart and classify emit their artifacts plus a manifest") {
  fs::path dir = fresh_dir("classify");
  std::string text;
  int rc = run({"classify", "--example", "ex2-pendulum-x2y", "--out",
                dir.string()},
               &text);
  CHECK(rc == 0);
  CHECK(fs::exists(dir / "verdict.json"));
  CHECK(fs::exists(dir / "theorem_conditions.json"));
  CHECK(text.find("PolynomiallyStable") != std::string::npos);
  std::string manifest = slurp(dir / "MANIFEST");
  CHECK(manifest.find("verdict.json ok") != std::string::npos);
  CHECK(manifest.find("theorem_conditions.json ok") != std::string::npos);
}

TEST_CASE("cli: identical configs produce byte-identical artifacts") {
  fs::path d1 = fresh_dir("det1"), d2 = fresh_dir("det2");
  for (const fs::path& d : {d1, d2}) {
    std::string text;
    int rc = run({"lambda", "--example", "ex3-pendulum-x4y-x2y", "--out",
                  d.string()},
                 &text);
    REQUIRE(rc == 0);
  }
  CHECK(slurp(d1 / "lambda.csv") == slurp(d2 / "lambda.csv"));
  CHECK(slurp(d1 / "leading_fits.json") == slurp(d2 / "leading_fits.json"));
  CHECK(!slurp(d1 / "lambda.csv").empty());

  // RFC 4180: CRLF record separators, 17 significant digits
  std::string csv = slurp(d1 / "lambda.csv");
  CHECK(csv.find("\r\n") != std::string::npos);
  CHECK(csv.substr(0, csv.find("\r\n")) == "E,Lambda_1,Lambda_2,Lambda_3");
}

TEST_CASE("cli: simulate writes one trajectory per seed") {
  fs::path dir = fresh_dir("simulate");
  std::string text;
  int rc = run({"simulate", "--example", "wkb-linear", "--tend", "100",
                "--out", dir.string()},
               &text);
  CHECK(rc == 0);
  CHECK(fs::exists(dir / "trajectory_00.csv"));
  std::string csv = slurp(dir / "trajectory_00.csv");
  CHECK(csv.substr(0, csv.find("\r\n")) == "t,x,y,E");
}

TEST_CASE("cli: cycles subcommand locates the saturating-term cycle") {
  fs::path dir = fresh_dir("cycles");
  std::string text;
  int rc = run({"cycles", "--example", "ex4-harmonic-cycle", "--out",
                dir.string()},
               &text);
  CHECK(rc == 0);
  CHECK(text.find("stable cycle at E = 0.99999999") != std::string::npos);
  CHECK(slurp(dir / "cycles.json").find("\"stable\": true") !=
        std::string::npos);
}

TEST_CASE("cli: sweep emits one row per grid point and tolerates bad cells") {
  fs::path dir = fresh_dir("sweep");
  std::string text;
  int rc = run({"sweep", "--example", "ex2-pendulum-x2y", "--grid",
                "lam=-1:1:3,alpha=-2:2:3", "--out", dir.string()},
               &text);
  CHECK(rc == 0);
  std::string csv = slurp(dir / "sweep.csv");
  std::size_t rows = 0;
  for (std::size_t pos = 0; (pos = csv.find("\r\n", pos)) != std::string::npos;
       ++pos)
    ++rows;
  CHECK(rows == 10);  // header + 9 cells
  CHECK(csv.find("lam,alpha,regime") == 0);

  // a poisoned cell must not abort the sweep
  fs::path dir2 = fresh_dir("sweep_err");
  rc = run({"sweep", "--example", "ex2-pendulum-x2y", "--grid",
            "lam=nan:nan:1,alpha=-2:2:2", "--out", dir2.string()},
           &text);
  CHECK(rc == 0);
  std::string csv2 = slurp(dir2 / "sweep.csv");
  CHECK(csv2.find("Error") != std::string::npos);
}

TEST_CASE("cli: verify on the damped oscillator reports a passing seed set") {
  fs::path dir = fresh_dir("verify");
  std::string text;
  int rc = run({"verify", "--example", "wkb-linear", "--param",
                "gamma=-0.5,kappa=1", "--tend", "2000", "--out", dir.string()},
               &text);
  CHECK(rc == 0);
  CHECK(text.find("PolynomiallyStable") != std::string::npos);
  CHECK(text.find("verify: PASS") != std::string::npos);
  CHECK(slurp(dir / "verify_report.json").find("\"pass\": true") !=
        std::string::npos);
}

TEST_CASE("cli: list prints the example corpus") {
  std::string text;
  CHECK(run({"list"}, &text) == 0);
  CHECK(text.find("ex4-harmonic-cycle") != std::string::npos);
  CHECK(text.find("wkb-linear") != std::string::npos);
}

TEST_CASE("cli: chart subcommand emits the orbit table and frequency table") {
  fs::path dir = fresh_dir("chart");
  std::string text;
  int rc = run({"chart", "--example", "wkb-linear", "--out", dir.string()},
               &text);
  CHECK(rc == 0);
  std::string csv = slurp(dir / "chart.csv");
  CHECK(csv.substr(0, csv.find("\r\n")) == "E,j,phi,X,Y");
  std::string omega = slurp(dir / "omega.csv");
  CHECK(omega.substr(0, omega.find("\r\n")) == "E,omega");
}

TEST_CASE("cli: a failing stage leaves a manifest naming the abort") {
  fs::path dir = fresh_dir("aborted");
  std::string cfg_path = (dir / "open.json").string();
  std::ofstream(cfg_path) << R"({
    "version": 1,
    "system": {"h0": "(x^2+y^2)/2 + 10*x^3", "q": 2, "e0": 1.0}
  })";
  std::string text;
  int rc = run({"classify", "--config", cfg_path, "--out", dir.string()},
               &text);
  CHECK(rc == 2);
  std::string manifest = slurp(dir / "MANIFEST");
  CHECK(manifest.find("aborted") != std::string::npos);
}

TEST_CASE("cli: every builtin example verifies end-to-end at defaults") {
  for (const std::string& id : builtin_example_ids()) {
    fs::path dir = fresh_dir("verify_" + id);
    std::string text;
    int rc = run({"verify", "--example", id, "--out", dir.string()}, &text);
    CHECK(rc == 0);
    CHECK_MESSAGE(text.find("verify: PASS") != std::string::npos,
                  id << ": " << text);
  }
}

TEST_CASE("cli: sweep output is deterministic") {
  fs::path d1 = fresh_dir("sweepdet1"), d2 = fresh_dir("sweepdet2");
  for (const fs::path& d : {d1, d2}) {
    std::string text;
    int rc = run({"sweep", "--example", "ex4-harmonic-cycle", "--grid",
                  "lam=-0.5:0.5:3,mu=0.25:0.75:2", "--out", d.string()},
                 &text);
    REQUIRE(rc == 0);
  }
  CHECK(slurp(d1 / "sweep.csv") == slurp(d2 / "sweep.csv"));
  CHECK(!slurp(d1 / "sweep.csv").empty());
}
