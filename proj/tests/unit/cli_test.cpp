#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "retinavr/session.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int exit_code = -1;
  std::string out;  // stdout and stderr interleaved
};

Result sh(const std::string& args) {
  const std::string cmd = std::string(RETINAVR_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("retinavr_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json error_of(const Result& r) { return json::parse(r.out)["error"]; }

}  // namespace

TEST_CASE("reproduce-table6 prints the navigation exits row") {
  const auto r = sh("reproduce-table6");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("navigation  sphere_exits  combined  0.70 [0.18, 1.22]  medium") != std::string::npos);
  CHECK(r.out.find("peeling  safety  combined  1.06 [0.52, 1.60]  very large") != std::string::npos);
  // Only combined rows by default: 14 module/metric pairs.
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 14);

  const auto all = sh("reproduce-table6 --all-runs --json");
  CHECK(all.exit_code == 0);
  CHECK(json::parse(all.out).size() == 56);
}

TEST_CASE("run rejects empty and unfinished logs") {
  const auto dir = scratch("run");
  const auto empty = dir / "empty.session.jsonl";
  std::ofstream(empty).close();
  auto r = sh("run --module navigation --input " + empty.string());
  CHECK(r.exit_code != 0);
  CHECK(error_of(r)["code"] == "IncompleteSession");

  retinavr::SessionLog log;
  log.header.module = retinavr::TaskKind::Navigation;
  log.header.seed = 4;
  log.header.layout_hash = retinavr::init_task(retinavr::TaskKind::Navigation, {}, 4).layout_hash;
  const auto header_only = dir / "header.session.jsonl";
  retinavr::write_log(header_only.string(), log);
  r = sh("run --module navigation --input " + header_only.string());
  CHECK(r.exit_code != 0);
  CHECK(error_of(r)["code"] == "IncompleteSession");

  // replay accepts it and force-finalizes.
  r = sh("replay --input " + header_only.string());
  CHECK(r.exit_code == 0);
  CHECK(json::parse(r.out)["metrics"]["completed"] == false);
  fs::remove_all(dir);
}

TEST_CASE("usage errors are machine readable") {
  auto r = sh("reproduce-table6 --no-such-flag");
  CHECK(r.exit_code == 2);
  CHECK(error_of(r)["code"] == "UsageError");
  r = sh("");
  CHECK(r.exit_code == 2);
  r = sh("synth --profile wizard --seed 1 --out /tmp/x");
  CHECK(r.exit_code == 1);
  CHECK(error_of(r)["code"] == "InvalidConfig");
}

TEST_CASE("synth, run and analyze work end to end") {
  const auto dir = scratch("e2e");
  const auto logs = dir / "logs";
  CHECK(sh("synth --profile novice --participants 2 --runs 2 --module navigation --seed 5 --out " + logs.string())
            .exit_code == 0);
  CHECK(sh("synth --profile expert --participants 2 --runs 2 --module navigation --seed 6 --out " + logs.string())
            .exit_code == 0);
  std::size_t count = 0;
  for (const auto& e : fs::directory_iterator(logs)) count += e.path().string().ends_with(".session.jsonl");
  CHECK(count == 8);

  const auto one = logs / "n01_run1_navigation.session.jsonl";
  const auto metrics = dir / "m.json";
  REQUIRE(sh("run --module navigation --input " + one.string() + " --out " + metrics.string()).exit_code == 0);
  json m;
  std::ifstream(metrics) >> m;
  CHECK(m == retinavr::to_json(retinavr::replay(retinavr::read_log(one.string()))));

  const auto report = dir / "report";
  const auto r = sh("analyze --metrics " + logs.string() + " --report " + report.string());
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(report / "report.json"));
  CHECK(fs::exists(report / "effect_sizes.csv"));
  CHECK(fs::exists(report / "lmm.csv"));

  // A config that fails validation is rejected, from the flag or the environment.
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << "{\"sphere_count\": -3}";
  const auto e = sh("run --module navigation --input " + one.string() + " --config " + bad.string());
  CHECK(e.exit_code == 1);
  CHECK(error_of(e)["code"] == "InvalidConfig");
  const std::string cmd = "RETINAVR_CONFIG=" + bad.string() + " " + std::string(RETINAVR_CLI) +
                          " run --module navigation --input " + one.string() + " >/dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 1);
  fs::remove_all(dir);
}
