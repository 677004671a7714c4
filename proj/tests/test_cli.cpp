#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "oulab/cli.hpp"
#include "oulab/config.hpp"
#include "oulab/fields.hpp"

using namespace oulab;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string cfg(const std::string& name) { return std::string(OULAB_CONFIG_DIR) + "/" + name + ".json"; }

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "oulab_cli_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto p = scratch(name);
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("assumptions on the trivial problem pass") {
  const Run r = run({"assumptions", "--config", cfg("heat_circle"), "--no-timestamp"});
  CHECK(r.code == kExitOk);
  const json j = json::parse(r.out);
  CHECK(j["all_pass"] == true);
  CHECK_FALSE(j.contains("timestamp"));
  for (const auto& c : j["conditions"]) CHECK(c["pass"] == true);
}

TEST_CASE("thresholds report matches compute_thresholds") {
  const Run r = run({"thresholds", "--config", cfg("sep_circle")});
  REQUIRE(r.code == kExitOk);
  const json j = json::parse(r.out);
  const Thresholds t = compute_thresholds(load_problem(cfg("sep_circle")).problem.constants);
  CHECK(j["C_coercive"].get<double>() == t.c_coercive);
  CHECK(j["lambda1"].get<double>() == t.lambda1);
  CHECK(j["C_Ueps"].get<double>() == 32.0);
  CHECK(j.contains("timestamp"));
  // keys come out sorted
  std::string prev;
  for (auto it = j.begin(); it != j.end(); ++it) {
    CHECK(prev <= it.key());
    prev = it.key();
  }
}

TEST_CASE("exit code two on failed checks") {
  const std::string bad = std::string(OULAB_TEST_DATA) + "/failing_a6.json";
  const Run a = run({"assumptions", "--config", bad, "--no-timestamp"});
  CHECK(a.code == kExitCheckFailed);
  const json j = json::parse(a.out);  // the report is still written
  CHECK(j["all_pass"] == false);
  CHECK(run({"thresholds", "--config", bad}).code == kExitCheckFailed);
  CHECK(run({"inequalities", "--config", bad, "--family", "coercive", "--oracle-n", "16", "--suite-size", "3"}).code ==
        kExitCheckFailed);
}

TEST_CASE("exit code one on usage and config errors") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"assumptions"}).code == kExitUsage);
  CHECK(run({"assumptions", "--config", "/nonexistent.json"}).code == kExitUsage);
  const std::string broken = write_file("broken.json", "{\"manifold\": \"circle\", \"V\": ");
  Run r = run({"assumptions", "--config", broken});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find(broken) != std::string::npos);
  const std::string badfield = write_file("badfield.json", R"J({"manifold": "circle", "V": "cos(theta"})J");
  r = run({"thresholds", "--config", badfield});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("field 'V'") != std::string::npos);
  CHECK(run({"estimate", "--config", cfg("heat_circle"), "--dt", "0"}).code == kExitUsage);
  CHECK(run({"estimate", "--config", cfg("heat_circle"), "--x0", "1,2"}).code == kExitUsage);
  CHECK(run({"sc-check", "--config", cfg("heat_circle"), "--format", "xml"}).code == kExitUsage);
  CHECK(run({"thresholds", "--config", cfg("heat_circle"), "--p", "1"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("estimate output is reproducible across runs and worker counts") {
  const std::vector<std::string> base{"estimate", "--config", cfg("fk_circle"), "--t", "0.5", "--dt", "0.01",
                                      "--paths", "3000", "--points", "3", "--seed", "17"};
  auto with = [&](std::vector<std::string> extra) {
    auto a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  };
  const Run a = with({"--threads", "1"});
  const Run b = with({"--threads", "3"});
  REQUIRE(a.code == kExitOk);
  CHECK(a.out == b.out);
  CHECK(a.out.rfind("theta,re_0,im_0,stderr_0,n_paths,t,surviving_fraction,forced\n", 0) == 0);
  const Run j1 = with({"--format", "json", "--no-timestamp"});
  const Run j2 = with({"--format", "json", "--no-timestamp", "--threads", "2"});
  CHECK(j1.out == j2.out);
}

TEST_CASE("oracle-compare passes on the heat problem") {
  const Run r = run({"oracle-compare", "--config", cfg("heat_circle"), "--t", "0.5", "--paths", "4000", "--dt", "0.01",
                     "--points", "4"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("mc_re,mc_im,stderr,oracle_re,oracle_im,abs_diff,tolerance,pass") != std::string::npos);
}

TEST_CASE("other subcommands") {
  Run r = run({"calculus", "--rule", "p1", "--trials", "2", "--manifold", "circle", "--oracle-n", "16"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.rfind("rule,manifold,trials,max_residual,pass\np1,circle,2,", 0) == 0);
  r = run({"ibp", "--config", cfg("fk_circle"), "--pairs", "3", "--oracle-n", "32"});
  CHECK(r.code == kExitOk);
  r = run({"sc-check", "--config", cfg("sphere_heat"), "--no-timestamp"});
  CHECK(r.code == kExitOk);
  CHECK(json::parse(r.out)["bakry_lower_bound"].get<double>() == doctest::Approx(1.0));
  r = run({"inequalities", "--config", cfg("coercive_circle"), "--family", "cz", "--oracle-n", "32", "--suite-size",
           "5", "--no-timestamp"});
  CHECK(r.code == kExitOk);
  const json j = json::parse(r.out);
  CHECK(j["reports"][0]["empirical_constant"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
  const std::string dump = scratch("paths.bin").string();
  r = run({"simulate", "--config", cfg("sphere_heat"), "--paths", "5", "--t", "0.1", "--dt", "0.01", "--dump-paths", dump});
  CHECK(r.code == kExitOk);
  CHECK(std::filesystem::file_size(dump) == 5 * (8 + 11 * 3 * 8));
}

TEST_CASE("output file") {
  const std::string out = scratch("thr.json").string();
  std::filesystem::remove(out);
  const Run r = run({"thresholds", "--config", cfg("coercive_circle"), "--output", out, "--no-timestamp"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.empty());
  std::ifstream in(out);
  const json j = json::parse(in);
  CHECK(j.contains("lambda1"));
}

}
