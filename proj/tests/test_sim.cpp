#include <doctest.h>

#include "regemu/sim.hpp"
#include "regemu/trace.hpp"
#include "regemu/verify.hpp"
#include "support.hpp"

using namespace regemu;
using namespace regemu::testing;

namespace {

Scenario two_writers(const std::string& policy) {
  return parse_scenario(R"(
name: two_writers
algorithm: cas-abd
n: 3
f: 1
k: 2
workload:
  - {client: 0, op: write, value: 1}
  - {client: 1, op: write, value: 2}
  - {client: 0, op: read}
  - {client: 1, op: read}
adversary: )" + policy + "\nseed: 4\n");
}

Scenario adi(std::uint32_t f, std::uint32_t k) {
  Scenario sc;
  sc.name = "adi";
  sc.algorithm = Algorithm::baseline_rw;
  sc.f = f;
  sc.n = 2 * f + 1;
  sc.k = k;
  sc.adversary.policy = PolicyKind::adi;
  for (std::uint32_t s = 0; s < f; ++s) sc.adversary.faulty_set.push_back(ServerId{s});
  sc.seed = 9;
  return sc;
}

Event ll_event(Step step, EventKind kind, OpId id, ObjectId o) {
  Event e;
  e.step = step;
  e.kind = kind;
  e.actor = Actor::of(id.client);
  e.op = id;
  e.object = o;
  e.ll_kind = LlKind::reg_write;
  return e;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("empty workload") {
  auto sc = parse_scenario("name: empty\nalgorithm: cas-abd\nn: 3\nf: 1\nk: 1\n");
  auto res = run(sc);
  CHECK(res.history.events.empty());
  CHECK_FALSE(res.history.truncated);
}

TEST_CASE("runs are pure functions of scenario and seed") {
  auto sc = two_writers("random");
  const auto a = write_trace(run(sc, 21).history);
  const auto b = write_trace(run(sc, 21).history);
  CHECK(a == b);
  int differing = 0;
  for (std::uint64_t s = 0; s < 10; ++s) differing += write_trace(run(sc, s).history) != a;
  CHECK(differing >= 8);
}

TEST_CASE("a solo write under the synchronous schedule takes two rounds") {
  auto sc = parse_scenario(R"(
name: solo
algorithm: cas-abd
n: 3
f: 1
k: 1
workload:
  - {client: 0, op: write, value: 5}
adversary: sync
)");
  auto res = run(sc);
  CHECK(res.pending.empty());
  auto b = check_bounds(res.history);
  REQUIRE(b.ops.size() == 1);
  CHECK(b.ops[0].rounds == 2);
  CHECK(b.ops[0].max_failed == 0);
}

TEST_CASE("fair random runs answer every trigger") {
  auto sc = two_writers("random");
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto res = run(sc, s);
    CHECK(res.pending.empty());
    CHECK(check_fairness(res.history).verdict == Verdict::pass);
    CHECK(check_linearizable(project(res.history)).verdict == Verdict::pass);
  }
}

TEST_CASE("a deferral bound of 1 serves actions in lockstep") {
  auto sc = two_writers("random");
  sc.adversary.fairness_bound = 1;
  auto res = run(sc, 2);
  CHECK(res.pending.empty());
  CHECK(check_fairness(res.history).verdict == Verdict::pass);
}

TEST_CASE("scenario errors") {
  auto sc = two_writers("random");
  SUBCASE("unbounded deferral in fair mode") {
    sc.adversary.unbounded_deferral = true;
    CHECK_THROWS_AS(sc.validate(), ConfigError);
  }
  SUBCASE("crashing a server twice") {
    sc.adversary.policy = PolicyKind::crash;
    sc.adversary.crashes = {CrashSpec{5, ServerId{1}, {}}, CrashSpec{9, ServerId{1}, {}}};
    CHECK_THROWS_AS(sc.validate(), ConfigError);
  }
  SUBCASE("more than f crashes without beyond_tolerance") {
    sc.adversary.policy = PolicyKind::crash;
    sc.adversary.crashes = {CrashSpec{5, ServerId{1}, {}}, CrashSpec{9, ServerId{2}, {}}};
    CHECK_THROWS_AS(sc.validate(), ConfigError);
    sc.adversary.beyond_tolerance = true;
    CHECK_NOTHROW(sc.validate());
  }
  SUBCASE("cas-abd needs n > 2f") {
    sc.n = 2;
    CHECK_THROWS_AS(sc.validate(), ConfigError);
  }
  SUBCASE("covering adversary rejects CAS storage") {
    sc.adversary.policy = PolicyKind::adi;
    sc.adversary.faulty_set = {ServerId{0}};
    CHECK_THROWS_AS(sc.validate(), ConfigError);
  }
  SUBCASE("unknown algorithm, with its line") {
    try {
      parse_scenario("name: x\nalgorithm: paxos\n");
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "algorithm");
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("unknown key") { CHECK_THROWS_AS(parse_scenario("name: x\nbogus: 1\n"), ConfigError); }
}

TEST_CASE("crashing f servers mid-run does not block") {
  auto sc = two_writers("crash");
  sc.adversary.crashes = {CrashSpec{6, ServerId{0}, {}}};
  for (std::uint64_t s = 0; s < 30; ++s) {
    auto res = run(sc, s);
    CHECK(res.pending.empty());
    CHECK(check_crash_containment(res.history).verdict == Verdict::pass);
    CHECK(check_linearizable(project(res.history)).verdict == Verdict::pass);
  }
}

TEST_CASE("crashing f+1 servers blocks the write") {
  auto sc = two_writers("crash");
  sc.adversary.crashes = {CrashSpec{1, ServerId{0}, {}}, CrashSpec{2, ServerId{1}, {}}};
  sc.adversary.beyond_tolerance = true;
  sc.step_budget = 2000;
  auto res = run(sc);
  CHECK(res.history.truncated);
  CHECK_FALSE(res.pending.empty());
  for (const auto& e : res.history.events) CHECK(e.kind != EventKind::hl_return);
}

TEST_CASE("measure_cov") {
  History h;
  const auto w = op(0, 3);
  h.events = {ll_event(4, EventKind::ll_trigger, w, ObjectId{1}), ll_event(8, EventKind::ll_apply, w, ObjectId{1})};
  CHECK(measure_cov(h, 2).empty());
  CHECK(measure_cov(h, 5) == std::set<ObjectId>{ObjectId{1}});
  CHECK(measure_cov(h, 8).empty());
}

TEST_CASE("covering adversary: one epoch per writer, coverage grows by f") {
  for (auto [f, k] : {std::pair{1u, 1u}, std::pair{1u, 3u}, std::pair{2u, 2u}}) {
    CAPTURE(f);
    CAPTURE(k);
    auto sc = adi(f, k);
    auto res = run(sc);
    REQUIRE(res.epochs.size() == k);
    for (std::size_t i = 0; i < res.epochs.size(); ++i) {
      CHECK(res.epochs[i].cov_size >= (i + 1) * f);
      CHECK(res.epochs[i].cov_servers_in_f.empty());
      CHECK(res.epochs[i].point_contention == 1);
    }
    CHECK(res.q_monotonicity_violations == 0);
    CHECK(run_point_contention(res.history) == 1);
    auto rep = check_adi(res.history);
    CHECK(rep.verdict == Verdict::pass);
    CHECK(rep.conformance_violations == 0);
  }
}

TEST_CASE("measure_cov agrees with the live covered set") {
  auto sc = adi(1, 3);
  auto res = run(sc);
  for (const auto& ep : res.epochs) CHECK(measure_cov(res.history, ep.end_step) == ep.cov);
}

}  // TEST_SUITE
