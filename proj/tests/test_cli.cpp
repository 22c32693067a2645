#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "regemu/report.hpp"
#include "regemu/sim.hpp"
#include "regemu/trace.hpp"
#include "support.hpp"

using namespace regemu;
using namespace regemu::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

fs::path scratch() {
  auto dir = fs::temp_directory_path() / ("regemu_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli(const std::string& args, const std::string& env = "") {
  const auto out_file = scratch() / "stdout.txt";
  const std::string cmd = env + " " + REGEMU_CLI + " " + args + " > " + out_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = slurp(out_file);
  return o;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("run the smoke scenario") {
  auto o = cli("run --scenario " + scenario_path("casabd_smoke"));
  CHECK(o.code == 0);
  CHECK(o.out.find("check lin pass") != std::string::npos);
  CHECK(o.out.find("resource_consumption 3") != std::string::npos);
}

TEST_CASE("a corrupted trace fails the replay check") {
  const auto trace = scratch() / "smoke.jsonl";
  CHECK(cli("run --scenario " + scenario_path("casabd_smoke") + " --trace " + trace.string()).code == 0);
  CHECK(cli("check --trace " + trace.string()).code == 0);

  auto h = read_trace_file(trace.string());
  bool mutated = false;
  for (auto& e : h.events) {
    if (e.kind == EventKind::ll_apply && e.after && e.prev && !(*e.after == *e.prev)) {
      e.after = e.prev;  // the apply now claims it changed nothing
      mutated = true;
      break;
    }
  }
  REQUIRE(mutated);
  const auto bad = scratch() / "smoke_bad.jsonl";
  std::ofstream(bad) << write_trace(h);
  auto o = cli("check --trace " + bad.string() + " --checks linpoints");
  CHECK(o.code == 1);
  CHECK(o.out.find("check linpoints fail") != std::string::npos);
}

TEST_CASE("configuration errors exit 2 with the field and line") {
  const auto bad = scratch() / "bad.yaml";
  std::ofstream(bad) << "name: bad\nn: 3\nalgorithm: paxos\n";
  auto o = cli("run --scenario " + bad.string());
  CHECK(o.code == 2);
  CHECK(o.out.find("algorithm") != std::string::npos);
  CHECK(o.out.find("line 3") != std::string::npos);
  CHECK(cli("run --scenario /nonexistent.yaml").code == 2);
  CHECK(cli("run --scenario " + scenario_path("casabd_smoke") + " --checks bogus").code == 2);
}

TEST_CASE("beyond-tolerance crashes truncate with exit 3") {
  auto o = cli("run --scenario " + scenario_path("crash_2"));
  CHECK(o.code == 3);
  CHECK(o.out.find("truncated") != std::string::npos);
  CHECK(o.out.find("pending") != std::string::npos);
}

TEST_CASE("enumerate") {
  auto full = cli("enumerate --scenario " + scenario_path("tiny_enum"));
  CHECK(full.code == 0);
  CHECK(full.out.find("verdict pass") != std::string::npos);
  CHECK(full.out.find("interleavings") != std::string::npos);
  auto capped = cli("enumerate --scenario " + scenario_path("tiny_enum") + " --cap 10");
  CHECK(capped.code == 3);
  CHECK(capped.out.find("verdict partial") != std::string::npos);
}

TEST_CASE("sweep with plot data") {
  const auto plot = scratch() / "plot.tsv";
  auto o = cli("sweep --scenario " + scenario_path("contention_k1") + " --seeds 0..9 --clients 1,2 --parallel 2" +
               " --plot-data " + plot.string());
  CHECK(o.code == 0);
  CHECK(o.out.find("k=2 runs=10") != std::string::npos);
  const auto tsv = slurp(plot);
  CHECK(tsv.find("# storage") != std::string::npos);
  CHECK(tsv.find("1\t1\tcas-abd\t3") != std::string::npos);
  CHECK(tsv.find("# contention") != std::string::npos);
}

TEST_CASE("jsonl reports parse and carry one record per checker") {
  auto o = cli("run --scenario " + scenario_path("adi_f1_k3") + " --report-format jsonl");
  CHECK(o.code == 0);
  std::stringstream ss(o.out);
  std::string line;
  REQUIRE(std::getline(ss, line));
  auto run_rec = nlohmann::json::parse(line);
  CHECK(run_rec["record"] == "run");
  CHECK(run_rec["cov_trajectory"] == nlohmann::json::array({1, 2, 3}));
  int checks = 0;
  while (std::getline(ss, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j["record"] == "check");
    CHECK(j["verdict"] == "pass");
    ++checks;
  }
  CHECK(checks >= 4);
}

TEST_CASE("same seed, same bytes; environment overrides") {
  const auto a = scratch() / "a.jsonl", b = scratch() / "b.jsonl", c = scratch() / "c.jsonl";
  const std::string base = "run --scenario " + scenario_path("mixed_k4");
  CHECK(cli(base + " --seed 5 --trace " + a.string()).code == 0);
  CHECK(cli(base + " --seed 5 --trace " + b.string()).code == 0);
  CHECK(cli(base + " --trace " + c.string(), "REGEMU_SEED=5").code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) == slurp(c));
  CHECK(!slurp(a).empty());
}

TEST_CASE("reports are reproducible from scenario and seed") {
  auto sc = load_scenario(scenario_path("mixed_k2"));
  auto r1 = make_report(sc, run(sc, 8), {});
  auto r2 = make_report(sc, run(sc, 8), {});
  CHECK(render_text(r1) == render_text(r2));
  CHECK(render_jsonl(r1) == render_jsonl(r2));
  CHECK(r1.exit_code() == 0);
}

TEST_CASE("seed ranges") {
  CHECK(parse_range("3..7", "seeds") == std::pair<std::uint64_t, std::uint64_t>{3, 7});
  CHECK(parse_range("4", "seeds") == std::pair<std::uint64_t, std::uint64_t>{4, 4});
  CHECK_THROWS_AS(parse_range("7..3", "seeds"), ConfigError);
  CHECK_THROWS_AS(parse_range("x..3", "seeds"), ConfigError);
}

}  // TEST_SUITE
