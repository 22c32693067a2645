#pragma once

#include <map>
#include <string>
#include <vector>

#include "regemu/scenario.hpp"
#include "regemu/sim.hpp"
#include "regemu/verify.hpp"

namespace regemu {

struct RunReport {
  std::string scenario;
  std::string digest;      // of the scenario's canonical form
  std::uint64_t seed = 0;
  std::string trace_hash;  // of the serialized trace
  bool truncated = false;
  std::string truncation_reason;
  Step steps = 0;
  std::vector<OpId> pending;
  std::uint64_t resource = 0;
  std::uint32_t max_pnt_cont = 0;
  std::uint32_t max_failed_cas = 0;
  std::vector<EpochRecord> epochs;
  WorldDiagnostics diagnostics;
  std::vector<CheckOutcome> checks;

  bool any_failed() const;
  /// 0 all pass, 1 a checker failed, 3 truncated without a failure.
  int exit_code() const;
};

RunReport make_report(const Scenario& sc, const RunResult& r, const std::vector<std::string>& checks);
std::string render_text(const RunReport& r);
/// One JSON record per line: a run record, then one per checker.
std::string render_jsonl(const RunReport& r);

/// "a..b" (inclusive) or a single number.
std::pair<std::uint64_t, std::uint64_t> parse_range(const std::string& text, const std::string& field);

struct SweepOptions {
  std::uint64_t first_seed = 0;
  std::uint64_t last_seed = 0;
  unsigned parallel = 1;
  std::vector<std::string> checks;  // empty: defaults for the algorithm
};

struct SweepPoint {
  std::uint32_t k = 0;
  std::uint64_t runs = 0;
  std::uint64_t truncated = 0;
  std::map<std::string, std::uint64_t> passed;  // per checker
  std::map<std::string, std::uint64_t> failed;
  std::uint64_t min_resource = ~std::uint64_t{0};
  std::uint64_t max_resource = 0;
  std::map<std::uint32_t, std::uint32_t> max_failed_by_pnt_cont;
  std::vector<std::size_t> min_cov_by_epoch;  // covering adversary only
  std::uint64_t diagnostics_dirty = 0;
  std::vector<std::string> first_failures;    // "seed: checker: witness", capped
};

struct SweepSummary {
  std::string scenario;
  std::string algorithm;
  std::uint32_t f = 0;
  std::vector<SweepPoint> points;  // one per k

  bool any_failed() const;
};

/// Runs every seed for every client count in `ks` (the scenario's own k when
/// empty). Runs are independent and may execute on `parallel` threads.
SweepSummary sweep(const Scenario& sc, const SweepOptions& opt, const std::vector<std::uint32_t>& ks = {});

std::string render_sweep(const SweepSummary& s);
/// Tab-separated plot data: a storage table and a contention table.
std::string render_plot_data(const SweepSummary& s);

}  // namespace regemu
