#include "regemu/report.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "regemu/trace.hpp"

namespace regemu {

using json = nlohmann::json;

bool RunReport::any_failed() const {
  return std::any_of(checks.begin(), checks.end(), [](const CheckOutcome& c) { return c.verdict == Verdict::fail; });
}

int RunReport::exit_code() const {
  if (any_failed()) return 1;
  if (truncated) return 3;
  return 0;
}

RunReport make_report(const Scenario& sc, const RunResult& r, const std::vector<std::string>& checks) {
  RunReport rep;
  rep.scenario = sc.name;
  rep.digest = hex64(fnv1a(sc.canonical()));
  rep.seed = r.history.header.seed;
  rep.trace_hash = hex64(fnv1a(write_trace(r.history)));
  rep.truncated = r.history.truncated;
  rep.truncation_reason = r.history.truncation_reason;
  rep.steps = r.history.steps;
  rep.pending = r.pending;
  rep.resource = resource_consumption(r.history);
  rep.max_pnt_cont = run_point_contention(r.history);
  rep.epochs = r.epochs;
  rep.diagnostics = r.diagnostics;
  rep.checks = run_checks(r.history, checks.empty() ? default_checks(r.history) : checks);
  for (const auto& c : rep.checks) {
    if (c.name != "bounds") continue;
    if (auto it = c.metrics.find("max_failed_cas"); it != c.metrics.end()) {
      rep.max_failed_cas = static_cast<std::uint32_t>(std::stoul(it->second));
    }
  }
  return rep;
}

std::string render_text(const RunReport& r) {
  std::ostringstream o;
  o << "scenario " << r.scenario << " digest " << r.digest << " seed " << r.seed << "\n";
  o << "steps " << r.steps << " trace " << r.trace_hash;
  if (r.truncated) o << " truncated (" << r.truncation_reason << ")";
  o << "\n";
  if (!r.pending.empty()) {
    o << "pending";
    for (auto id : r.pending) o << " " << to_string(id);
    o << "\n";
  }
  o << "resource_consumption " << r.resource << "\n";
  o << "max_point_contention " << r.max_pnt_cont << "\n";
  o << "runtime_invariants guard=" << r.diagnostics.guard_violations
    << " monotonic=" << r.diagnostics.monotonic_violations << " ts_ties=" << r.diagnostics.ts_ties << "\n";
  for (const auto& ep : r.epochs) {
    o << "epoch " << ep.epoch << " t=" << ep.end_step << " |Cov|=" << ep.cov_size
      << " on_F=" << ep.cov_servers_in_f.size() << " |Q|=" << ep.q_size << " pnt_cont=" << ep.point_contention
      << "\n";
  }
  for (const auto& c : r.checks) {
    o << "check " << c.name << " " << to_string(c.verdict);
    for (const auto& [k, v] : c.metrics) o << " " << k << "=" << v;
    if (!c.witness.empty()) o << " :: " << c.witness;
    o << "\n";
  }
  return o.str();
}

std::string render_jsonl(const RunReport& r) {
  std::ostringstream o;
  json run;
  run["record"] = "run";
  run["scenario"] = r.scenario;
  run["digest"] = r.digest;
  run["seed"] = r.seed;
  run["trace_hash"] = r.trace_hash;
  run["steps"] = r.steps;
  run["truncated"] = r.truncated;
  run["reason"] = r.truncation_reason;
  run["resource_consumption"] = r.resource;
  run["max_point_contention"] = r.max_pnt_cont;
  json pending = json::array();
  for (auto id : r.pending) pending.push_back(to_string(id));
  run["pending"] = pending;
  json cov = json::array();
  for (const auto& ep : r.epochs) cov.push_back(ep.cov_size);
  run["cov_trajectory"] = cov;
  o << run.dump() << "\n";
  for (const auto& c : r.checks) {
    json j;
    j["record"] = "check";
    j["name"] = c.name;
    j["verdict"] = std::string(to_string(c.verdict));
    j["witness"] = c.witness;
    j["metrics"] = c.metrics;
    o << j.dump() << "\n";
  }
  return o.str();
}

std::pair<std::uint64_t, std::uint64_t> parse_range(const std::string& text, const std::string& field) {
  auto num = [&](const std::string& s) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw ConfigError(field, "expected a number or range a..b, got '" + text + "'");
    }
    return std::stoull(s);
  };
  auto dots = text.find("..");
  if (dots == std::string::npos) {
    auto v = num(text);
    return {v, v};
  }
  auto a = num(text.substr(0, dots));
  auto b = num(text.substr(dots + 2));
  if (b < a) throw ConfigError(field, "empty range '" + text + "'");
  return {a, b};
}

bool SweepSummary::any_failed() const {
  for (const auto& p : points) {
    for (const auto& [name, n] : p.failed) {
      if (n > 0) return true;
    }
    if (p.diagnostics_dirty) return true;
  }
  return false;
}

SweepSummary sweep(const Scenario& base, const SweepOptions& opt, const std::vector<std::uint32_t>& ks) {
  SweepSummary out;
  out.scenario = base.name;
  out.algorithm = std::string(to_string(base.algorithm));
  out.f = base.f;
  const std::vector<std::uint32_t> client_counts = ks.empty() ? std::vector<std::uint32_t>{base.k} : ks;
  for (auto k : client_counts) {
    Scenario sc = base;
    sc.k = k;
    if (sc.placement && sc.algorithm == Algorithm::baseline_rw && k != base.k) sc.placement.reset();
    sc.validate();

    SweepPoint pt;
    pt.k = k;
    std::mutex mu;
    std::atomic<std::uint64_t> next{opt.first_seed};
    auto worker = [&]() {
      while (true) {
        const std::uint64_t seed = next.fetch_add(1);
        if (seed > opt.last_seed) return;
        auto res = run(sc, seed);
        auto rep = make_report(sc, res, opt.checks);
        std::map<std::uint32_t, std::uint32_t> by_c;
        if (sc.algorithm == Algorithm::cas_abd) {
          auto b = check_bounds(res.history);
          for (const auto& ob : b.per_object) {
            auto it = std::find_if(b.ops.begin(), b.ops.end(), [&](const OpBound& op) { return op.op == ob.op; });
            if (it == b.ops.end()) continue;
            by_c[it->pnt_cont] = std::max(by_c[it->pnt_cont], ob.failed);
          }
        }
        std::lock_guard<std::mutex> lock(mu);
        ++pt.runs;
        if (rep.truncated) ++pt.truncated;
        if (!rep.diagnostics.clean()) ++pt.diagnostics_dirty;
        pt.min_resource = std::min(pt.min_resource, rep.resource);
        pt.max_resource = std::max(pt.max_resource, rep.resource);
        for (const auto& c : rep.checks) {
          if (c.verdict == Verdict::pass) ++pt.passed[c.name];
          if (c.verdict == Verdict::fail) {
            ++pt.failed[c.name];
            if (pt.first_failures.size() < 5) {
              pt.first_failures.push_back(std::to_string(seed) + ": " + c.name + ": " + c.witness);
            }
          }
        }
        for (const auto& [c, m] : by_c) pt.max_failed_by_pnt_cont[c] = std::max(pt.max_failed_by_pnt_cont[c], m);
        for (std::size_t i = 0; i < res.epochs.size(); ++i) {
          if (pt.min_cov_by_epoch.size() <= i) pt.min_cov_by_epoch.push_back(res.epochs[i].cov_size);
          pt.min_cov_by_epoch[i] = std::min(pt.min_cov_by_epoch[i], res.epochs[i].cov_size);
        }
      }
    };
    const unsigned threads = std::max(1u, opt.parallel);
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (pt.runs == 0) pt.min_resource = 0;
    out.points.push_back(std::move(pt));
  }
  return out;
}

std::string render_sweep(const SweepSummary& s) {
  std::ostringstream o;
  o << "sweep " << s.scenario << " algorithm " << s.algorithm << " f " << s.f << "\n";
  for (const auto& p : s.points) {
    o << "k=" << p.k << " runs=" << p.runs << " truncated=" << p.truncated << " resource=" << p.min_resource;
    if (p.max_resource != p.min_resource) o << ".." << p.max_resource;
    o << " invariant_firings=" << p.diagnostics_dirty << "\n";
    std::set<std::string> names;
    for (const auto& [n, c] : p.passed) names.insert(n);
    for (const auto& [n, c] : p.failed) names.insert(n);
    for (const auto& n : names) {
      auto get = [&](const std::map<std::string, std::uint64_t>& m) {
        auto it = m.find(n);
        return it == m.end() ? std::uint64_t{0} : it->second;
      };
      o << "  " << n << " pass " << get(p.passed) << "/" << p.runs << " fail " << get(p.failed) << "\n";
    }
    for (const auto& [c, m] : p.max_failed_by_pnt_cont) {
      o << "  pnt_cont " << c << " max_failed_cas " << m << " bound " << obstruction_bound(c) << "\n";
    }
    if (!p.min_cov_by_epoch.empty()) {
      o << "  min |Cov| by epoch";
      for (auto c : p.min_cov_by_epoch) o << " " << c;
      o << "\n";
    }
    for (const auto& f : p.first_failures) o << "  failure " << f << "\n";
  }
  return o.str();
}

std::string render_plot_data(const SweepSummary& s) {
  std::ostringstream o;
  o << "# storage\nk\tf\talgorithm\tresource_consumption\n";
  for (const auto& p : s.points) o << p.k << "\t" << s.f << "\t" << s.algorithm << "\t" << p.max_resource << "\n";
  o << "\n# contention\nk\tPntCont\tmax_failed_cas\tbound\n";
  for (const auto& p : s.points) {
    for (const auto& [c, m] : p.max_failed_by_pnt_cont) {
      o << p.k << "\t" << c << "\t" << m << "\t" << obstruction_bound(c) << "\n";
    }
  }
  if (std::any_of(s.points.begin(), s.points.end(), [](const SweepPoint& p) { return !p.min_cov_by_epoch.empty(); })) {
    o << "\n# coverage\nk\tepoch\tmin_cov\tfloor\n";
    for (const auto& p : s.points) {
      for (std::size_t i = 0; i < p.min_cov_by_epoch.size(); ++i) {
        o << p.k << "\t" << i + 1 << "\t" << p.min_cov_by_epoch[i] << "\t" << (i + 1) * s.f << "\n";
      }
    }
  }
  return o.str();
}

}  // namespace regemu
