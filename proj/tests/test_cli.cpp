#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = SOFTKD_CLI_PATH;

struct RunResult {
  int exit_code;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

RunResult run(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const std::string cmd = kCli + " " + args + " > " + out.string() + " 2> " + (dir / "stderr.txt").string();
  const int rc = std::system(cmd.c_str());
  return {WEXITSTATUS(rc), slurp(out)};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("softkd_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

const std::string kTinyConfig = R"({
  "task": {"dim": 6, "classes": 4, "samples": 800, "noise": 0.0, "seed": 1},
  "arch": [6, 24, 16, 4],
  "teacher": {"epochs": 20, "eta": 0.05, "batch": 32, "seed": 11},
  "operator": {"family": "power"},
  "temperature": 2.0,
  "probe": {"size": 64, "seed": 31},
  "schedule": {"n_stages": 4, "rho_target": 0.8, "epochs_per_stage": 2, "eta": 0.05, "batch": 32, "seed": 21},
  "experiments": {
    "pipeline": {"enabled": true, "seeds": 2, "min_wins": 0},
    "biasvar": {"enabled": true, "students": 3, "epochs": 2, "sparsity_levels": [0.0, 0.6], "seeds": 2, "min_wins": 0},
    "sweep": {"enabled": true, "n_list": [1, 2], "total_epochs": 2, "seeds": 1, "assert_trend": false}
  }
})";

}  // namespace

TEST_CASE("soften: analytic line at 4 digits, identity, error paths") {
  TempDir tmp;
  spit(tmp.path / "d.jsonl", "{\"p\":[0.8,0.2]}\n");

  auto r = run("soften --op power --temp 2.0 --digits 4 --in " + (tmp.path / "d.jsonl").string() +
                   " --out " + (tmp.path / "s.jsonl").string(),
               tmp.path);
  CHECK(r.exit_code == 0);
  CHECK(slurp(tmp.path / "s.jsonl") == "{\"p\":[0.6667,0.3333]}\n");

  // T = 1: full-precision output re-parses to the input
  r = run("soften --op power --temp 1.0 --in " + (tmp.path / "d.jsonl").string() + " --out " +
              (tmp.path / "id.jsonl").string(),
          tmp.path);
  CHECK(r.exit_code == 0);
  const auto j = nlohmann::json::parse(slurp(tmp.path / "id.jsonl"));
  CHECK(j["p"][0].get<double>() == 0.8);

  // malformed line: exit 2 citing line 1
  spit(tmp.path / "bad.jsonl", "{\"p\":[0.3,0.3]}\n");
  r = run("soften --op power --temp 2.0 --in " + (tmp.path / "bad.jsonl").string() + " --out " +
              (tmp.path / "x.jsonl").string(),
          tmp.path);
  CHECK(r.exit_code == 2);
  CHECK(slurp(tmp.path / "stderr.txt").find("line 1") != std::string::npos);

  // missing input: exit 1
  r = run("soften --op power --temp 2.0 --in " + (tmp.path / "missing.jsonl").string() + " --out " +
              (tmp.path / "x.jsonl").string(),
          tmp.path);
  CHECK(r.exit_code == 1);

  // unknown operator: exit 2
  r = run("soften --op nope --temp 2.0 --in " + (tmp.path / "d.jsonl").string() + " --out " +
              (tmp.path / "x.jsonl").string(),
          tmp.path);
  CHECK(r.exit_code == 2);
}

TEST_CASE("complete: maxent line and strategy validation") {
  TempDir tmp;
  spit(tmp.path / "t.jsonl", "{\"V\":5,\"topk\":[[0,0.5],[1,0.3]]}\n");
  auto r = run("complete --strategy maxent --in " + (tmp.path / "t.jsonl").string() + " --out " +
                   (tmp.path / "c.jsonl").string(),
               tmp.path);
  CHECK(r.exit_code == 0);
  const auto j = nlohmann::json::parse(slurp(tmp.path / "c.jsonl"));
  CHECK(j["p"].size() == 5);
  CHECK(j["p"][0].get<double>() == 0.5);
  CHECK(std::abs(j["p"][2].get<double>() - 0.2 / 3.0) < 1e-12);

  // --vocab fallback when lines omit V
  spit(tmp.path / "nov.jsonl", "{\"topk\":[[0,0.5],[1,0.3]]}\n");
  r = run("complete --strategy renorm --vocab 4 --in " + (tmp.path / "nov.jsonl").string() +
              " --out " + (tmp.path / "c2.jsonl").string(),
          tmp.path);
  CHECK(r.exit_code == 0);

  // infeasible top-k: exit 2
  spit(tmp.path / "inf.jsonl", "{\"V\":4,\"topk\":[[0,0.4],[1,0.05]]}\n");
  r = run("complete --strategy maxent --in " + (tmp.path / "inf.jsonl").string() + " --out " +
              (tmp.path / "c3.jsonl").string(),
          tmp.path);
  CHECK(r.exit_code == 2);
}

TEST_CASE("verify: conforming passes, broken fails with exit 3") {
  TempDir tmp;
  auto r = run("verify --op power --samples 60 --seed 42 --out " + (tmp.path / "rep.json").string(),
               tmp.path);
  CHECK(r.exit_code == 0);
  auto rep = nlohmann::json::parse(slurp(tmp.path / "rep.json"));
  CHECK(rep["all_pass"].get<bool>());

  r = run("verify --op broken_sharpener --samples 60 --seed 42 --out " + (tmp.path / "broken.json").string(),
          tmp.path);
  CHECK(r.exit_code == 3);
  rep = nlohmann::json::parse(slurp(tmp.path / "broken.json"));
  CHECK_FALSE(rep["all_pass"].get<bool>());
  CHECK_FALSE(rep["checks"]["entropy_monotone"]["pass"].get<bool>());
  CHECK(rep["checks"]["entropy_monotone"]["counterexample"].is_object());

  r = run("verify --op nonsense --samples 10", tmp.path);
  CHECK(r.exit_code == 2);

  // SOFTKD_SEED pins the seed for CI
  const std::string out = (tmp.path / "env.json").string();
  const int rc = std::system(("SOFTKD_SEED=777 " + kCli + " verify --op power --samples 40 --out " + out +
                              " > /dev/null 2>&1")
                                 .c_str());
  CHECK(WEXITSTATUS(rc) == 0);
  rep = nlohmann::json::parse(slurp(out));
  CHECK(rep["seed"].get<std::uint64_t>() == 777);
}

TEST_CASE("equiv: unrestricted witness and grid verdicts") {
  TempDir tmp;
  spit(tmp.path / "teachers.jsonl", "{\"p\":[0.8,0.2]}\n");

  auto r = run("equiv --op-a power --op-b mixing --class unrestricted --v 2 --temp 2.0 --teachers " +
                   (tmp.path / "teachers.jsonl").string() + " --out " + (tmp.path / "v.json").string(),
               tmp.path);
  CHECK(r.exit_code == 0);
  auto v = nlohmann::json::parse(slurp(tmp.path / "v.json"));
  CHECK_FALSE(v["equivalent"].get<bool>());
  CHECK(std::abs(v["witness"]["argmin_a"][0].get<double>() - 2.0 / 3.0) < 1e-12);

  r = run("equiv --op-a power --op-b mixing --class grid --v 2 --g 5 --temp 2.0 --teachers " +
              (tmp.path / "teachers.jsonl").string() + " --out " + (tmp.path / "g5.json").string(),
          tmp.path);
  CHECK(r.exit_code == 0);
  v = nlohmann::json::parse(slurp(tmp.path / "g5.json"));
  CHECK(v["equivalent"].get<bool>());

  r = run("equiv --op-a power --op-b power --class grid --v 3 --g 50 --temp 2.0 --samples 3 --out " +
              (tmp.path / "same.json").string(),
          tmp.path);
  CHECK(r.exit_code == 0);
  v = nlohmann::json::parse(slurp(tmp.path / "same.json"));
  CHECK(v["equivalent"].get<bool>());
}

TEST_CASE("simulate: runs, writes artifacts, deterministic bytes, assertion gating") {
  TempDir tmp;
  spit(tmp.path / "exp.json", kTinyConfig);

  auto r = run("simulate --config " + (tmp.path / "exp.json").string() + " --out " +
                   (tmp.path / "res1").string(),
               tmp.path);
  CHECK(r.exit_code == 0);
  for (const char* f : {"stages.csv", "biasvar.csv", "convergence.csv", "summary.json"})
    CHECK(fs::exists(tmp.path / "res1" / f));
  const auto summary = nlohmann::json::parse(slurp(tmp.path / "res1" / "summary.json"));
  CHECK(summary["all_pass"].get<bool>());

  // rerun: byte-identical CSVs
  r = run("simulate --config " + (tmp.path / "exp.json").string() + " --out " +
              (tmp.path / "res2").string(),
          tmp.path);
  CHECK(r.exit_code == 0);
  for (const char* f : {"stages.csv", "biasvar.csv", "convergence.csv", "summary.json"})
    CHECK(slurp(tmp.path / "res1" / f) == slurp(tmp.path / "res2" / f));

  // impossible assertion threshold: exit 3, summary still written
  std::string failing = kTinyConfig;
  const auto pos = failing.find("\"min_wins\": 0");
  failing.replace(pos, std::string("\"min_wins\": 0").size(), "\"min_wins\": 3");
  spit(tmp.path / "fail.json", failing);
  r = run("simulate --config " + (tmp.path / "fail.json").string() + " --out " +
              (tmp.path / "res3").string(),
          tmp.path);
  CHECK(r.exit_code == 3);
  CHECK_FALSE(nlohmann::json::parse(slurp(tmp.path / "res3" / "summary.json"))["all_pass"].get<bool>());

  // config validation: exit 2
  spit(tmp.path / "bad.json", R"({"schedule": {"n_stages": 0}})");
  r = run("simulate --config " + (tmp.path / "bad.json").string() + " --out " +
              (tmp.path / "res4").string(),
          tmp.path);
  CHECK(r.exit_code == 2);

  // biasvar / sweep verbs write only their artifact
  r = run("biasvar --config " + (tmp.path / "exp.json").string() + " --out " + (tmp.path / "bv").string(),
          tmp.path);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(tmp.path / "bv" / "biasvar.csv"));
  CHECK_FALSE(fs::exists(tmp.path / "bv" / "stages.csv"));
}
