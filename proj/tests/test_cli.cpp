#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// The gfrag binary is handed to us by the test harness.
static std::string cli_path() {
  const char* p = std::getenv("GFRAG_CLI_PATH");
  REQUIRE_MESSAGE(p != nullptr, "GFRAG_CLI_PATH must point at the gfrag binary");
  return p;
}

static const fs::path& work_dir() {
  static fs::path d = [] {
    fs::path p = fs::temp_directory_path() /
                 ("gfrag-cli-test-" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return d;
}

static fs::path cache_dir() {
  fs::path p = work_dir() / "cache";
  fs::create_directories(p);
  return p;
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

static std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs the CLI with an isolated cache directory, capturing stdout, stderr
// and the exit code.
static RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path errf = work_dir() / ("stderr_" + std::to_string(counter++));
  const std::string cmd = "GFRAG_CACHE_DIR='" + cache_dir().string() + "' '" +
                          cli_path() + "' " + args + " 2>'" + errf.string() +
                          "'";
  RunResult res;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0)
    res.out.append(buf, got);
  const int status = ::pclose(pipe);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  res.err = slurp(errf);
  return res;
}

static fs::path write_config(const std::string& name, const std::string& body) {
  fs::path p = work_dir() / name;
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << body;
  REQUIRE(out.good());
  return p;
}

// Constant growth, linear absorption, binary splitting in the shifted
// weight: the configuration every certified-result hypothesis accepts.
static const char* kGoodConfig =
    "# basic covered scenario\n"
    "[scenario]\n"
    "name = cfg_case\n"
    "\n"
    "[space]\n"
    "weight = shifted\n"
    "alpha = 2\n"
    "\n"
    "[grid]\n"
    "x_min = 1e-4\n"
    "x_max = 50\n"
    "n = 96\n"
    "\n"
    "[growth]\n"
    "family = constant\n"
    "k = 1\n"
    "\n"
    "[absorption]\n"
    "family = linear\n"
    "k = 1\n"
    "\n"
    "[kernel]\n"
    "family = uniform_binary\n"
    "\n"
    "[initial]\n"
    "kind = gaussian_bump\n"
    "center = 1\n"
    "width = 0.2\n"
    "\n"
    "[run]\n"
    "t_max = 0.5\n"
    "seed = 11\n";

// Same kernel and absorption, but linear growth with the shifted weight:
// no certified result covers this combination.
static const char* kUncoveredConfig =
    "[scenario]\n"
    "name = uncovered_case\n"
    "\n"
    "[space]\n"
    "weight = shifted\n"
    "alpha = 2\n"
    "\n"
    "[grid]\n"
    "x_min = 1e-4\n"
    "x_max = 50\n"
    "n = 96\n"
    "\n"
    "[growth]\n"
    "family = linear\n"
    "k = 1\n"
    "\n"
    "[absorption]\n"
    "family = linear\n"
    "k = 1\n"
    "\n"
    "[kernel]\n"
    "family = uniform_binary\n"
    "\n"
    "[initial]\n"
    "kind = gaussian_bump\n"
    "center = 1\n"
    "width = 0.2\n"
    "\n"
    "[run]\n"
    "t_max = 0.5\n"
    "seed = 11\n";

TEST_CASE("validate: covered scenario, exit 0, verdict in JSON and on disk") {
  const fs::path cfg = write_config("good.ini", kGoodConfig);
  const fs::path out = work_dir() / "out_validate";
  RunResult r = run_cli("validate --config '" + cfg.string() + "' --out '" +
                        out.string() + "'");
  CHECK(r.code == 0);

  Json j = Json::parse(r.out);
  CHECK(j.at("schema_version").get<int>() == 1);
  CHECK(j.at("command").get<std::string>() == "validate");
  CHECK(j.at("scenario").get<std::string>() == "cfg_case");
  CHECK(j.at("verdict").get<std::string>() == "Thm-Main-result");
  CHECK(j.at("regime").at("regime").get<std::string>() == "partly_singular");
  CHECK(j.at("moment_ratio_condition").at("satisfied").get<bool>());
  CHECK(j.at("initial_tail_ok").get<bool>());

  const fs::path jf = out / "cfg_case_validate.json";
  REQUIRE(fs::exists(jf));
  Json on_disk = Json::parse(slurp(jf));
  CHECK(on_disk.at("verdict").get<std::string>() == "Thm-Main-result");
}

TEST_CASE("validate: uncovered scenario still exits 0 and names the failure") {
  const fs::path cfg = write_config("uncovered.ini", kUncoveredConfig);
  const fs::path out = work_dir() / "out_validate_unc";
  RunResult r = run_cli("validate --config '" + cfg.string() + "' --out '" +
                        out.string() + "'");
  CHECK(r.code == 0);
  Json j = Json::parse(r.out);
  CHECK(j.at("verdict").get<std::string>() == "none");
  CHECK(j.at("failing_hypothesis").get<std::string>().find(
            "regime/space mismatch") != std::string::npos);
  CHECK(j.at("banner").get<std::string>().find("NO THEOREM APPLIES") !=
        std::string::npos);
}

TEST_CASE("gating: heavy command refuses, override proceeds, outputs cleaned") {
  const fs::path cfg = write_config("uncovered2.ini", kUncoveredConfig);
  const fs::path out = work_dir() / "out_gate";

  RunResult refused = run_cli("transport --config '" + cfg.string() +
                              "' --out '" + out.string() + "'");
  CHECK(refused.code == 1);
  CHECK(refused.err.find("NO THEOREM APPLIES") != std::string::npos);
  CHECK(refused.err.find("--override-verdict") != std::string::npos);
  CHECK_FALSE(fs::exists(out / "uncovered_case_transport.json"));
  CHECK_FALSE(fs::exists(out / "uncovered_case_transport.csv"));

  RunResult forced = run_cli("transport --config '" + cfg.string() +
                             "' --out '" + out.string() +
                             "' --override-verdict");
  CHECK(forced.code == 0);
  CHECK(forced.err.find("despite the verdict") != std::string::npos);
  CHECK(forced.out.find("wrote ") != std::string::npos);
  REQUIRE(fs::exists(out / "uncovered_case_transport.json"));
  REQUIRE(fs::exists(out / "uncovered_case_transport.csv"));

  Json j = Json::parse(slurp(out / "uncovered_case_transport.json"));
  CHECK(j.at("verdict").get<std::string>() == "none");
  CHECK(j.at("norm_f0").get<double>() > 0.0);

  const std::string csv = slurp(out / "uncovered_case_transport.csv");
  CHECK(csv.rfind("# schema_version=1", 0) == 0);
  CHECK(csv.find("x,f0,u0_t,u_t") != std::string::npos);
}

TEST_CASE("config errors carry line numbers and exit 2") {
  SUBCASE("unknown key") {
    std::string body(kGoodConfig);
    body += "typo = 3\n";  // lands in [run]
    int line = 1;
    for (char c : std::string(kGoodConfig)) line += c == '\n';
    const fs::path cfg = write_config("bad_key.ini", body);
    RunResult r = run_cli("validate --config '" + cfg.string() + "'");
    CHECK(r.code == 2);
    CHECK(r.err.find("config error:") != std::string::npos);
    CHECK(r.err.find("unknown key 'typo'") != std::string::npos);
    CHECK(r.err.find(":" + std::to_string(line) + ":") != std::string::npos);
  }
  SUBCASE("line without '='") {
    const fs::path cfg = write_config(
        "malformed.ini", "[space]\nweight shifted\n");
    RunResult r = run_cli("validate --config '" + cfg.string() + "'");
    CHECK(r.code == 2);
    CHECK(r.err.find(":2:") != std::string::npos);
    CHECK(r.err.find("expected 'key = value'") != std::string::npos);
  }
  SUBCASE("non-numeric value") {
    std::string body(kGoodConfig);
    const auto pos = body.find("alpha = 2");
    REQUIRE(pos != std::string::npos);
    body.replace(pos, 9, "alpha = two");
    const fs::path cfg = write_config("bad_num.ini", body);
    RunResult r = run_cli("validate --config '" + cfg.string() + "'");
    CHECK(r.code == 2);
    CHECK(r.err.find("not a number") != std::string::npos);
  }
  SUBCASE("missing file") {
    RunResult r = run_cli("validate --config '" +
                          (work_dir() / "does_not_exist.ini").string() + "'");
    CHECK(r.code == 2);
    CHECK(r.err.find("cannot open config file") != std::string::npos);
  }
  SUBCASE("missing --config flag") {
    RunResult r = run_cli("validate");
    CHECK(r.code == 2);
  }
  SUBCASE("unknown builtin name") {
    RunResult r = run_cli("eigen --config builtin:nope");
    CHECK(r.code == 1);  // scenario lookup failure, not a config parse error
    CHECK(r.err.find("unknown builtin scenario") != std::string::npos);
  }
}

TEST_CASE("determinism: repeated runs emit byte-identical reports") {
  const fs::path cfg = write_config("det.ini", kGoodConfig);
  const fs::path d1 = work_dir() / "det1";
  const fs::path d2 = work_dir() / "det2";

  RunResult r1 = run_cli("threshold --config '" + cfg.string() + "' --out '" +
                         d1.string() + "'");
  REQUIRE(r1.code == 0);
  // The second run resolves the applicability report through the cache;
  // the bytes must not change either way.
  RunResult r2 = run_cli("threshold --config '" + cfg.string() + "' --out '" +
                         d2.string() + "'");
  REQUIRE(r2.code == 0);

  const std::string j1 = slurp(d1 / "cfg_case_threshold.json");
  const std::string j2 = slurp(d2 / "cfg_case_threshold.json");
  REQUIRE(!j1.empty());
  CHECK(j1 == j2);
  const std::string c1 = slurp(d1 / "cfg_case_threshold.csv");
  const std::string c2 = slurp(d2 / "cfg_case_threshold.csv");
  REQUIRE(!c1.empty());
  CHECK(c1 == c2);
}

TEST_CASE("builtin shortcut: characteristics on the affine scenario") {
  const fs::path out = work_dir() / "out_builtin";
  RunResult r = run_cli("characteristics --config builtin:affine_growth "
                        "--tmax 0.5 --out '" + out.string() + "'");
  CHECK(r.code == 0);
  REQUIRE(fs::exists(out / "affine_growth_characteristics.json"));
  REQUIRE(fs::exists(out / "affine_growth_characteristics.csv"));
  Json j = Json::parse(slurp(out / "affine_growth_characteristics.json"));
  CHECK(j.at("verdict").get<std::string>() == "Thm-Main-result");
  // r = 1 + x: the front starting at the origin reaches e^t - 1.
  CHECK(j.at("front_at_t").get<double>() ==
        doctest::Approx(std::exp(0.5) - 1.0).epsilon(1e-9));
}

TEST_CASE("simulate: envelope overrides and cross-check fields") {
  const fs::path cfg = write_config("sim.ini", kGoodConfig);
  const fs::path out = work_dir() / "out_sim";
  RunResult r = run_cli("simulate --config '" + cfg.string() + "' --out '" +
                        out.string() + "' --grid-n 64 --seed 99 --tmax 0.4");
  CHECK(r.code == 0);
  Json j = Json::parse(slurp(out / "cfg_case_simulate.json"));
  CHECK(j.at("grid").at("n").get<int>() == 64);
  CHECK(j.at("seed").get<unsigned>() == 99u);
  CHECK(j.at("t_max").get<double>() == doctest::Approx(0.4));
  CHECK(j.at("lambda_ref").get<double>() ==
        doctest::Approx(j.at("lambda_desch").get<double>() + 1.0));
  CHECK(j.at("cross_check_rel").get<double>() >= 0.0);
  // sanity bound only: n = 64 keeps this test fast, and at that mesh the
  // two paths differ by honest discretization error; tight agreement at
  // reference resolution is covered by the evolution suite
  CHECK(j.at("cross_check_rel").get<double>() < 0.3);
  CHECK(j.at("duhamel").at("terms_used").get<int>() >= 2);

  const std::string csv = slurp(out / "cfg_case_simulate.csv");
  CHECK(csv.find("t,space_norm,moment0,moment1") != std::string::npos);
}

TEST_CASE("eigen: covered fully-singular scenario and the solvable control") {
  const fs::path out = work_dir() / "out_eigen";
  RunResult r = run_cli("eigen --config builtin:selfsimilar --grid-n 96 "
                        "--out '" + out.string() + "'");
  CHECK(r.code == 0);
  Json j = Json::parse(slurp(out / "selfsimilar_eigen.json"));
  CHECK(j.at("verdict").get<std::string>() == "Thm-Main-result-Bis");
  CHECK(j.at("eigen").at("converged").get<bool>());
  CHECK(std::isfinite(j.at("eigen").at("lambda_star").get<double>()));

  // The solvable configuration is deliberately outside every certified
  // result (its absorption rate vanishes at the origin), so the command
  // must refuse without the override and succeed with it.
  RunResult refused = run_cli("eigen --config builtin:exact_eigenpair "
                              "--grid-n 96 --out '" + out.string() + "'");
  CHECK(refused.code == 1);
  RunResult forced = run_cli("eigen --config builtin:exact_eigenpair "
                             "--grid-n 96 --override-verdict --out '" +
                             out.string() + "'");
  CHECK(forced.code == 0);
  Json e = Json::parse(slurp(out / "exact_eigenpair_eigen.json"));
  CHECK(e.at("eigen").at("lambda_star").get<double>() ==
        doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("svg flag writes a plot file") {
  const fs::path cfg = write_config("svg.ini", kGoodConfig);
  const fs::path out = work_dir() / "out_svg";
  RunResult r = run_cli("simulate --config '" + cfg.string() + "' --out '" +
                        out.string() + "' --grid-n 64 --svg");
  CHECK(r.code == 0);
  REQUIRE(fs::exists(out / "cfg_case_simulate.svg"));
  const std::string svg = slurp(out / "cfg_case_simulate.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
}

TEST_CASE("cache: warm, status, clear round-trip") {
  const fs::path cfg = write_config("cache.ini", kGoodConfig);

  RunResult cleared = run_cli("cache clear");
  REQUIRE(cleared.code == 0);

  RunResult warm = run_cli("cache warm --config '" + cfg.string() + "'");
  CHECK(warm.code == 0);
  Json wj = Json::parse(warm.out);
  CHECK(wj.at("action").get<std::string>() == "warm");
  CHECK(wj.at("scenario").get<std::string>() == "cfg_case");
  CHECK(wj.at("key").get<std::string>().size() == 16);
  CHECK(fs::path(wj.at("dir").get<std::string>()) == cache_dir());

  RunResult status = run_cli("cache status");
  CHECK(status.code == 0);
  Json sj = Json::parse(status.out);
  REQUIRE(sj.at("entries").is_array());
  CHECK(sj.at("entries").size() >= 1);

  RunResult clear = run_cli("cache clear");
  CHECK(clear.code == 0);
  Json cj = Json::parse(clear.out);
  CHECK(cj.at("removed").get<int>() >= 1);
  Json after = Json::parse(run_cli("cache status").out);
  CHECK(after.at("entries").empty());

  RunResult noconf = run_cli("cache warm");
  CHECK(noconf.code == 2);
}
