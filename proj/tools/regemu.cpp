// Command-line front end: run, sweep, check and enumerate.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "regemu/report.hpp"
#include "regemu/scenario.hpp"
#include "regemu/sim.hpp"
#include "regemu/trace.hpp"
#include "regemu/verify.hpp"

namespace {

using namespace regemu;

constexpr int kExitConfig = 2;

std::vector<std::string> split_checks(const std::string& text) {
  if (text.empty() || text == "default") return {};
  if (text == "all") return all_check_names();
  if (text == "none") return {"wellformed"};
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    write_file(path, content);
  }
}

struct Overrides {
  std::optional<std::uint64_t> budget;
  std::optional<std::uint64_t> fairness_bound;

  void apply(Scenario& sc) const {
    if (budget) sc.step_budget = *budget;
    if (fairness_bound) {
      sc.adversary.fairness_bound = *fairness_bound;
      sc.adversary.unbounded_deferral = false;
    }
  }
};

std::vector<std::uint32_t> client_range(const std::string& text) {
  std::vector<std::uint32_t> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto [a, b] = parse_range(item, "clients");
    for (auto k = a; k <= b; ++k) out.push_back(static_cast<std::uint32_t>(k));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"regemu: simulate and verify register emulations over crash-prone servers"};
  app.require_subcommand(1);

  Overrides ov;
  std::string scenario_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string trace_path, report_path, checks_text, report_format = "text";

  auto* run_cmd = app.add_subcommand("run", "execute one scenario");
  run_cmd->add_option("--scenario", scenario_path, "scenario file")->required()->envname("REGEMU_SCENARIO");
  run_cmd->add_option("--seed", seed, "run seed (default: the scenario's)")->envname("REGEMU_SEED");
  run_cmd->add_option("--trace", trace_path, "write the trace here");
  run_cmd->add_option("--report", report_path, "write the report here (default stdout)");
  run_cmd->add_option("--report-format", report_format, "text or jsonl")->check(CLI::IsMember({"text", "jsonl"}));
  run_cmd->add_option("--checks", checks_text, "comma list, 'all', 'none' or 'default'")->envname("REGEMU_CHECKS");
  run_cmd->add_option("--budget", ov.budget, "step budget override")->envname("REGEMU_BUDGET");
  run_cmd->add_option("--fairness-bound", ov.fairness_bound, "deferral bound override")
      ->envname("REGEMU_FAIRNESS_BOUND");

  std::string seeds_text, clients_text, plot_path;
  unsigned parallel = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a seed range and aggregate");
  sweep_cmd->add_option("--scenario", scenario_path, "scenario file")->required()->envname("REGEMU_SCENARIO");
  sweep_cmd->add_option("--seeds", seeds_text, "seed range a..b")->required()->envname("REGEMU_SEEDS");
  sweep_cmd->add_option("--parallel", parallel, "worker threads")->envname("REGEMU_PARALLEL");
  sweep_cmd->add_option("--clients", clients_text, "client counts, e.g. 1..8 or 1,2,4,8");
  sweep_cmd->add_option("--checks", checks_text, "comma list, 'all' or 'default'")->envname("REGEMU_CHECKS");
  sweep_cmd->add_option("--report", report_path, "write the summary here (default stdout)");
  sweep_cmd->add_option("--plot-data", plot_path, "write tab-separated plot data here");
  sweep_cmd->add_option("--budget", ov.budget, "step budget override")->envname("REGEMU_BUDGET");
  sweep_cmd->add_option("--fairness-bound", ov.fairness_bound, "deferral bound override")
      ->envname("REGEMU_FAIRNESS_BOUND");

  auto* check_cmd = app.add_subcommand("check", "run checkers over a recorded trace");
  check_cmd->add_option("--trace", trace_path, "trace file")->required();
  check_cmd->add_option("--checks", checks_text, "comma list, 'all' or 'default'")->envname("REGEMU_CHECKS");
  check_cmd->add_option("--report", report_path, "write the report here (default stdout)");
  check_cmd->add_option("--report-format", report_format, "text or jsonl")->check(CLI::IsMember({"text", "jsonl"}));

  EnumOptions eopt;
  auto* enum_cmd = app.add_subcommand("enumerate", "explore every schedule of a tiny scenario");
  enum_cmd->add_option("--scenario", scenario_path, "scenario file")->required()->envname("REGEMU_SCENARIO");
  enum_cmd->add_option("--cap", eopt.state_cap, "maximum distinct states");
  enum_cmd->add_option("--depth", eopt.depth, "maximum schedule length");
  enum_cmd->add_option("--crashes", eopt.max_crashes, "server crashes injected at every possible step");
  bool no_reduce = false;
  enum_cmd->add_flag("--no-reduce", no_reduce, "explore every ordering, without partial-order reduction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  seed_given = run_cmd->count("--seed") > 0 || std::getenv("REGEMU_SEED") != nullptr;

  try {
    if (*run_cmd) {
      Scenario sc = load_scenario(scenario_path);
      ov.apply(sc);
      auto result = run(sc, seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt);
      if (!trace_path.empty()) write_file(trace_path, write_trace(result.history));
      auto rep = make_report(sc, result, split_checks(checks_text));
      emit(report_path, report_format == "jsonl" ? render_jsonl(rep) : render_text(rep));
      return rep.exit_code();
    }
    if (*sweep_cmd) {
      Scenario sc = load_scenario(scenario_path);
      ov.apply(sc);
      SweepOptions so;
      std::tie(so.first_seed, so.last_seed) = parse_range(seeds_text, "seeds");
      so.parallel = parallel;
      so.checks = split_checks(checks_text);
      auto summary = sweep(sc, so, client_range(clients_text));
      emit(report_path, render_sweep(summary));
      if (!plot_path.empty()) write_file(plot_path, render_plot_data(summary));
      if (summary.any_failed()) return 1;
      return 0;
    }
    if (*check_cmd) {
      History h = read_trace_file(trace_path);
      auto checks = split_checks(checks_text);
      RunReport rep;
      rep.scenario = h.header.scenario;
      rep.seed = h.header.seed;
      rep.truncated = h.truncated;
      rep.truncation_reason = h.truncation_reason;
      rep.steps = h.steps;
      rep.resource = resource_consumption(h);
      rep.max_pnt_cont = run_point_contention(h);
      rep.trace_hash = hex64(fnv1a(write_trace(h)));
      rep.checks = run_checks(h, checks.empty() ? default_checks(h) : checks);
      emit(report_path, report_format == "jsonl" ? render_jsonl(rep) : render_text(rep));
      return rep.exit_code();
    }
    if (*enum_cmd) {
      Scenario sc = load_scenario(scenario_path);
      eopt.reduce = !no_reduce;
      auto r = exhaustive_check(sc, eopt);
      std::cout << "enumerate " << sc.name << " verdict " << to_string(r.verdict) << "\n"
                << "interleavings " << r.interleavings << "\n"
                << "states " << r.states << " terminals " << r.terminals << " outcomes " << r.outcomes << " max_depth " << r.max_depth << "\n"
                << "violations " << r.violations << " capped " << (r.capped ? "yes" : "no") << " depth_exceeded "
                << (r.depth_exceeded ? "yes" : "no") << " unfair_excluded " << r.unfair_excluded << "\n";
      if (!r.witness.empty()) std::cout << "witness " << r.witness << "\n";
      if (r.verdict == Verdict::fail) return 1;
      if (r.verdict == Verdict::partial) return 3;
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
