#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "regemu/sim.hpp"
#include "regemu/verify.hpp"
#include "support.hpp"

using namespace regemu;
using namespace regemu::testing;

namespace {

// All-orderings reference: some subset of pending writes is kept, every
// completed op is kept, and some permutation of them respects real time and
// register semantics.
bool brute_force_linearizable(const HlHistory& h) {
  std::vector<const HlOp*> fixed, optional;
  for (const auto& o : h.ops) {
    if (o.complete()) {
      fixed.push_back(&o);
    } else if (o.kind == HlKind::write) {
      optional.push_back(&o);
    }
  }
  for (std::uint32_t mask = 0; mask < (1u << optional.size()); ++mask) {
    std::vector<const HlOp*> ops = fixed;
    for (std::size_t i = 0; i < optional.size(); ++i) {
      if (mask & (1u << i)) ops.push_back(optional[i]);
    }
    std::vector<std::size_t> order(ops.size());
    std::iota(order.begin(), order.end(), 0);
    do {
      bool ok = true;
      Value current = kInitialValue;
      for (std::size_t i = 0; ok && i < order.size(); ++i) {
        const HlOp& a = *ops[order[i]];
        for (std::size_t j = i + 1; ok && j < order.size(); ++j) {
          const HlOp& b = *ops[order[j]];
          if (b.ret && *b.ret < a.invoke) ok = false;
        }
        if (!ok) break;
        if (a.kind == HlKind::write) {
          current = *a.value;
        } else if (a.value != current) {
          ok = false;
        }
      }
      if (ok) return true;
    } while (std::next_permutation(order.begin(), order.end()));
  }
  return false;
}

HlHistory random_history(std::mt19937_64& rng, std::size_t n_ops) {
  HlHistory h;
  std::vector<Value> written{kInitialValue};
  std::vector<Step> free_at(3, 0);
  std::vector<std::uint64_t> seq(3, 0);
  Step clock = 1;
  std::vector<std::size_t> open;
  std::vector<bool> stopped(3, false);
  for (std::size_t i = 0; i < n_ops; ++i) {
    std::uint32_t c = rng() % 3;
    for (int tries = 0; stopped[c] && tries < 3; ++tries) c = (c + 1) % 3;
    if (stopped[c]) break;
    const Step inv = std::max(clock, free_at[c]) + rng() % 3;
    clock = inv + 1;
    const bool pending = rng() % 6 == 0;
    const std::optional<Step> ret = pending ? std::nullopt : std::optional<Step>(inv + 1 + rng() % 8);
    if (pending) {
      stopped[c] = true;
    } else {
      free_at[c] = *ret + 1;
    }
    if (rng() % 2) {
      const Value v = val(c, ++seq[c]);
      written.push_back(v);
      h.ops.push_back(write_op(OpId{ClientId{c}, static_cast<std::uint32_t>(i)}, v, inv, ret));
    } else {
      h.ops.push_back(read_op(OpId{ClientId{c}, static_cast<std::uint32_t>(i)}, std::nullopt, inv, ret));
      open.push_back(h.ops.size() - 1);
    }
  }
  // reads pick among every value written anywhere in the history, or v0
  for (auto idx : open) {
    if (h.ops[idx].complete()) h.ops[idx].value = written[rng() % written.size()];
  }
  // steps must be distinct: spread them out by op index
  for (std::size_t i = 0; i < h.ops.size(); ++i) {
    h.ops[i].invoke = h.ops[i].invoke * 64 + i;
    if (h.ops[i].ret) h.ops[i].ret = *h.ops[i].ret * 64 + 32 + i;
  }
  return h;
}

// Swaps the positions of the first pair of consecutive CAS applies on one
// object where the earlier one changed the state and the swap keeps every op's
// trigger before its apply before its respond.
bool swap_two_applies(History& h) {
  auto find_after = [&](std::size_t from, EventKind kind, OpId id) -> std::optional<std::size_t> {
    for (std::size_t i = from; i < h.events.size(); ++i) {
      if (h.events[i].kind == kind && h.events[i].op == id) return i;
    }
    return std::nullopt;
  };
  auto find_before = [&](std::size_t to, EventKind kind, OpId id) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < to; ++i) {
      if (h.events[i].kind == kind && h.events[i].op == id) return i;
    }
    return std::nullopt;
  };
  for (std::size_t i = 0; i < h.events.size(); ++i) {
    const auto& a = h.events[i];
    if (a.kind != EventKind::ll_apply || !a.prev || !a.after || *a.prev == *a.after) continue;
    for (std::size_t j = i + 1; j < h.events.size(); ++j) {
      const auto& b = h.events[j];
      if (b.kind != EventKind::ll_apply || b.object != a.object) continue;
      auto resp_a = find_after(i, EventKind::ll_respond, a.op);
      auto trig_b = find_before(j, EventKind::ll_trigger, b.op);
      if (resp_a && *resp_a > j && trig_b && *trig_b < i) {
        std::swap(h.events[i], h.events[j]);
        std::swap(h.events[i].step, h.events[j].step);
        return true;
      }
      break;
    }
  }
  return false;
}

}  // namespace

TEST_SUITE("verify") {

TEST_CASE("linearizability examples") {
  const Value v1 = val(0, 1), v2 = val(1, 1);
  SUBCASE("write then read") {
    HlHistory h{{write_op(op(0, 0), v1, 1, 2), read_op(op(1, 0), v1, 3, 4)}};
    auto r = check_linearizable(h);
    CHECK(r.verdict == Verdict::pass);
    CHECK(r.linearization == std::vector<OpId>{op(0, 0), op(1, 0)});
  }
  SUBCASE("stale read after a complete write") {
    HlHistory h{{write_op(op(0, 0), v1, 1, 2), read_op(op(1, 0), kInitialValue, 3, 4)}};
    auto r = check_linearizable(h);
    CHECK(r.verdict == Verdict::fail);
    CHECK(std::find(r.witness_ops.begin(), r.witness_ops.end(), op(0, 0)) != r.witness_ops.end());
    CHECK(std::find(r.witness_ops.begin(), r.witness_ops.end(), op(1, 0)) != r.witness_ops.end());
  }
  SUBCASE("concurrent writes, then a read of either") {
    for (const Value& got : {v1, v2}) {
      HlHistory h{{write_op(op(0, 0), v1, 1, 4), write_op(op(1, 0), v2, 2, 3), read_op(op(2, 0), got, 5, 6)}};
      CHECK(check_linearizable(h).verdict == Verdict::pass);
      CHECK(brute_force_linearizable(h));
    }
  }
  SUBCASE("new/old inversion between two reads") {
    HlHistory h{{write_op(op(0, 0), v1, 1, 3), write_op(op(1, 0), v2, 2, 4), read_op(op(2, 0), v2, 5, 6),
                 read_op(op(2, 1), v1, 7, 8)}};
    CHECK(check_linearizable(h).verdict == Verdict::fail);
    CHECK_FALSE(brute_force_linearizable(h));
  }
  SUBCASE("pending writes may take effect or not") {
    HlHistory seen{{write_op(op(0, 0), v1, 1, std::nullopt), read_op(op(1, 0), v1, 3, 4)}};
    HlHistory unseen{{write_op(op(0, 0), v1, 1, std::nullopt), read_op(op(1, 0), kInitialValue, 3, 4)}};
    CHECK(check_linearizable(seen).verdict == Verdict::pass);
    CHECK(check_linearizable(unseen).verdict == Verdict::pass);
  }
  SUBCASE("duplicate write values are refused") {
    HlHistory h{{write_op(op(0, 0), v1, 1, 2), write_op(op(1, 0), v1, 3, 4)}};
    CHECK(check_linearizable(h).verdict == Verdict::inapplicable);
  }
  SUBCASE("a value nobody wrote") {
    HlHistory h{{read_op(op(0, 0), val(2, 9), 1, 2)}};
    CHECK(check_linearizable(h).verdict == Verdict::fail);
  }
}

TEST_CASE("linearizability agrees with the all-orderings oracle") {
  std::mt19937_64 rng(1234);
  int fails = 0, passes = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    const auto h = random_history(rng, 1 + rng() % 6);
    const bool expected = brute_force_linearizable(h);
    const auto got = check_linearizable(h);
    REQUIRE(got.verdict != Verdict::inapplicable);
    CAPTURE(trial);
    CHECK((got.verdict == Verdict::pass) == expected);
    (expected ? passes : fails) += 1;
  }
  // both outcomes must actually be exercised
  CHECK(passes > 300);
  CHECK(fails > 300);
}

TEST_CASE("sw-safety") {
  const Value v1 = val(0, 1), v2 = val(0, 2);
  SUBCASE("read after sequential writes must see the last") {
    HlHistory good{{write_op(op(0, 0), v1, 1, 2), write_op(op(0, 1), v2, 3, 4), read_op(op(1, 0), v2, 5, 6)}};
    HlHistory bad{{write_op(op(0, 0), v1, 1, 2), write_op(op(0, 1), v2, 3, 4), read_op(op(1, 0), v1, 5, 6)}};
    CHECK(check_sw_safety(good).verdict == Verdict::pass);
    CHECK(check_sw_safety(bad).verdict == Verdict::fail);
  }
  SUBCASE("reads overlapping a write are unconstrained") {
    HlHistory h{{write_op(op(0, 0), v1, 1, 5), read_op(op(1, 0), val(3, 3), 2, 3)}};
    CHECK(check_sw_safety(h).verdict == Verdict::pass);
  }
  SUBCASE("fresh read needs v0") {
    CHECK(check_sw_safety(HlHistory{{read_op(op(1, 0), kInitialValue, 1, 2)}}).verdict == Verdict::pass);
    CHECK(check_sw_safety(HlHistory{{read_op(op(1, 0), v1, 1, 2)}}).verdict == Verdict::fail);
  }
  SUBCASE("overlapping writes make it inapplicable") {
    HlHistory h{{write_op(op(0, 0), v1, 1, 4), write_op(op(2, 0), val(2, 1), 2, 5)}};
    CHECK(check_sw_safety(h).verdict == Verdict::inapplicable);
  }
}

TEST_CASE("linearization points replay through the oracle") {
  auto smoke = load_scenario(scenario_path("casabd_smoke"));
  SUBCASE("uncontended") {
    auto sc = load_scenario(scenario_path("sync_solo"));
    auto r = check_abdo_linpoints(run(sc).history);
    CHECK(r.verdict == Verdict::pass);
    CHECK(r.replayed > 0);
  }
  SUBCASE("racing clients") {
    auto sc = load_scenario(scenario_path("contention_k4"));
    for (std::uint64_t s = 0; s < 40; ++s) {
      auto r = check_abdo_linpoints(run(sc, s).history);
      CHECK(r.verdict == Verdict::pass);
      CHECK(r.state_mismatches == 0);
      CHECK(r.return_mismatches == 0);
      CHECK(r.read_obstructions == 0);
    }
  }
  SUBCASE("two swapped applies are caught") {
    int mutated = 0;
    for (std::uint64_t s = 0; s < 20 && mutated < 5; ++s) {
      auto h = run(smoke, s).history;
      if (!swap_two_applies(h)) continue;
      ++mutated;
      CHECK(check_abdo_linpoints(h).verdict == Verdict::fail);
    }
    CHECK(mutated > 0);
  }
}

TEST_CASE("timestamp uniqueness") {
  SUBCASE("MW-ABD runs") {
    auto sc = load_scenario(scenario_path("contention_k8"));
    for (std::uint64_t s = 0; s < 20; ++s) CHECK(check_ts_uniqueness(run(sc, s).history).verdict == Verdict::pass);
  }
  SUBCASE("empty history") { CHECK(check_ts_uniqueness(History{}).verdict == Verdict::pass); }
  SUBCASE("hand-made duplicate") {
    History h;
    Event e;
    e.step = 1;
    e.kind = EventKind::hl_invoke;
    AbdoNote n;
    n.invoke = true;
    n.kind = AbdoKind::update;
    n.object = ObjectId{0};
    n.ts = Timestamp{1, ClientId{0}};
    n.val = val(0, 1);
    e.abdo_notes.push_back(n);
    h.events.push_back(e);
    e.step = 2;
    e.abdo_notes[0].val = val(1, 1);
    h.events.push_back(e);
    auto r = check_ts_uniqueness(h);
    CHECK(r.verdict == Verdict::fail);
    CHECK(r.conflicting == 1);
  }
}

TEST_CASE("obstruction bound") {
  CHECK(obstruction_bound(1) == 6);
  CHECK(obstruction_bound(2) == 12);
  CHECK(obstruction_bound(8) == 90);

  SUBCASE("solo write with a warm cache") {
    auto b = check_bounds(run(load_scenario(scenario_path("sync_solo"))).history);
    REQUIRE(b.ops.size() == 2);
    CHECK(b.ops[1].max_failed == 0);
    CHECK(b.ok());
  }
  SUBCASE("k=2 contention sweep stays under the bound") {
    auto sc = load_scenario(scenario_path("contention_k2"));
    std::uint32_t max_failed = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      auto b = check_bounds(run(sc, s).history);
      CHECK(b.ok());
      for (const auto& op : b.ops) {
        CHECK(op.max_failed <= obstruction_bound(op.pnt_cont));
        if (op.pnt_cont <= 2) max_failed = std::max(max_failed, op.max_failed);
      }
    }
    CHECK(max_failed <= 12);
  }
}

TEST_CASE("resource consumption") {
  CHECK(resource_consumption(History{}) == 0);
  auto cas = load_scenario(scenario_path("contention_k4"));
  cas.n = 5;
  cas.f = 2;
  CHECK(resource_consumption(run(cas, 3).history) == 5);
  for (std::uint32_t k : {1u, 2u, 3u}) {
    Scenario sc;
    sc.algorithm = Algorithm::baseline_rw;
    sc.k = k;
    for (std::uint32_t c = 0; c < k; ++c) sc.workload.push_back(WorkloadOp{ClientId{c}, HlKind::write, c + 1, 0});
    CHECK(resource_consumption(run(sc).history) == 3 * k);
  }
}

TEST_CASE("run_checks names") {
  auto res = run(load_scenario(scenario_path("casabd_smoke")));
  auto out = run_checks(res.history, default_checks(res.history));
  for (const auto& c : out) {
    CAPTURE(c.name);
    CHECK(c.verdict == Verdict::pass);
  }
  CHECK_THROWS_AS(run_checks(res.history, {"nonsense"}), ConfigError);
}

TEST_CASE("exhaustive enumeration") {
  auto sc = parse_scenario(R"(
name: enum_small
algorithm: cas-abd
n: 3
f: 1
k: 2
workload:
  - {client: 0, op: write, value: 1}
  - {client: 1, op: read}
)");
  SUBCASE("every schedule linearizes, with and without a crash") {
    for (std::uint32_t crashes : {0u, 1u}) {
      EnumOptions opt;
      opt.max_crashes = crashes;
      auto r = exhaustive_check(sc, opt);
      CHECK(r.verdict == Verdict::pass);
      CHECK(r.violations == 0);
      CHECK(r.terminals > 0);
      CHECK_FALSE(r.capped);
    }
  }
  SUBCASE("reductions keep the reachable outcomes") {
    for (std::uint32_t crashes : {0u, 1u}) {
      EnumOptions opt;
      opt.max_crashes = crashes;
      auto reduced = exhaustive_check(sc, opt);
      opt.reduce = false;
      auto full = exhaustive_check(sc, opt);
      CHECK(full.verdict == Verdict::pass);
      CHECK(reduced.outcomes == full.outcomes);
      CHECK(reduced.states <= full.states);
    }
  }
  SUBCASE("too many crashes leave a stuck op") {
    EnumOptions opt;
    opt.max_crashes = 2;
    sc.adversary.beyond_tolerance = true;
    auto r = exhaustive_check(sc, opt);
    CHECK(r.verdict == Verdict::fail);
  }
  SUBCASE("small caps are partial") {
    EnumOptions cap;
    cap.state_cap = 10;
    CHECK(exhaustive_check(sc, cap).verdict == Verdict::partial);
    EnumOptions shallow;
    shallow.depth = 5;
    auto r = exhaustive_check(sc, shallow);
    CHECK(r.verdict == Verdict::partial);
    CHECK(r.depth_exceeded);
  }
  SUBCASE("oversized scenarios are rejected") {
    sc.k = 4;
    for (std::uint32_t c = 0; c < 4; ++c) sc.workload.push_back(WorkloadOp{ClientId{c}, HlKind::write, 9, 0});
    CHECK_THROWS_AS(exhaustive_check(sc), ConfigError);
  }
}

}  // TEST_SUITE
