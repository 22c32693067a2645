#include <doctest.h>

#include <random>

#include "regemu/sim.hpp"
#include "regemu/trace.hpp"
#include "support.hpp"

using namespace regemu;
using namespace regemu::testing;

TEST_SUITE("core") {

TEST_CASE("timestamps compare lexicographically") {
  CHECK(compare_timestamps({1, ClientId{2}}, {2, ClientId{1}}) == Ordering::less);
  CHECK(compare_timestamps({2, ClientId{1}}, {2, ClientId{1}}) == Ordering::equal);
  CHECK(compare_timestamps({2, ClientId{1}}, {2, ClientId{3}}) == Ordering::less);
  CHECK(compare_timestamps({2, ClientId{3}}, {2, ClientId{1}}) == Ordering::greater);
}

TEST_CASE("timestamp order is a strict total order") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> small(0, 3);
  auto draw = [&] { return Timestamp{static_cast<std::uint64_t>(small(rng)), ClientId{static_cast<std::uint32_t>(small(rng))}}; };
  for (int i = 0; i < 5000; ++i) {
    const auto a = draw(), b = draw(), c = draw();
    const int relations = (a < b) + (b < a) + (a == b);
    CHECK(relations == 1);
    if (a < b && b < c) CHECK(a < c);
    if (compare_timestamps(a, b) == Ordering::equal) CHECK((a.num == b.num && a.c == b.c));
    CHECK((compare_timestamps(a, b) == Ordering::less) == (compare_timestamps(b, a) == Ordering::greater));
  }
}

TEST_CASE("the initial tagged value") {
  CHECK(kInitialTagged.ts.num == 0);
  CHECK(kInitialTagged.ts.c == ClientId{0});
  CHECK(kInitialTagged.val.is_initial());
  CHECK(kInitialTagged.val.seq == 0);
}

TEST_CASE("precedes") {
  History h;
  const auto w = op(0, 0), r = op(1, 0), p = op(2, 0);
  h.events = {hl_invoke(1, w, HlKind::write, val(0, 1)), hl_return(5, w, HlKind::write),
              hl_invoke(6, p, HlKind::write, val(2, 1)), hl_invoke(7, r, HlKind::read),
              hl_return(9, r, HlKind::read, val(0, 1))};
  CHECK(precedes(h, w, r));
  CHECK_FALSE(precedes(h, r, w));
  SUBCASE("overlapping intervals") { CHECK_FALSE(precedes(h, p, r)); }
  SUBCASE("a pending op precedes nothing") {
    CHECK_FALSE(precedes(h, p, r));
    CHECK_FALSE(precedes(h, p, w));
  }
  SUBCASE("unknown op") { CHECK_THROWS_AS(precedes(h, op(5, 5), w), std::invalid_argument); }
}

TEST_CASE("point contention") {
  const auto a = op(0, 0), b = op(1, 0);
  SUBCASE("solo op") {
    History h;
    h.events = {hl_invoke(1, a, HlKind::write, val(0, 1)), hl_return(4, a, HlKind::write)};
    CHECK(point_contention(h, a) == 1);
  }
  SUBCASE("two overlapping writes") {
    History h;
    h.events = {hl_invoke(1, a, HlKind::write, val(0, 1)), hl_invoke(2, b, HlKind::write, val(1, 1)),
                hl_return(3, a, HlKind::write), hl_return(4, b, HlKind::write)};
    CHECK(point_contention(h, a) == 2);
    CHECK(point_contention(h, b) == 2);
    CHECK(run_point_contention(h) == 2);
  }
  SUBCASE("sequential writes") {
    History h;
    h.events = {hl_invoke(1, a, HlKind::write, val(0, 1)), hl_return(3, a, HlKind::write),
                hl_invoke(4, b, HlKind::write, val(1, 1)), hl_return(6, b, HlKind::write)};
    CHECK(point_contention(h, a) == 1);
    CHECK(point_contention(h, b) == 1);
  }
  SUBCASE("a pending op counts until the end") {
    History h;
    h.events = {hl_invoke(1, a, HlKind::write, val(0, 1)), hl_invoke(5, b, HlKind::write, val(1, 1)),
                hl_return(6, b, HlKind::write)};
    CHECK(point_contention(h, a) == 2);
  }
}

TEST_CASE("sequential runs have point contention 1 everywhere") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    History h;
    Step t = 1;
    std::vector<std::uint32_t> seq(4, 0);
    std::vector<OpId> ops;
    for (int i = 0; i < 6; ++i) {
      const std::uint32_t c = rng() % 4;
      const OpId id = op(c, seq[c]++);
      h.events.push_back(hl_invoke(t++, id, HlKind::write, val(c, seq[c])));
      t += rng() % 3;
      h.events.push_back(hl_return(t++, id, HlKind::write));
      ops.push_back(id);
    }
    for (auto id : ops) CHECK(point_contention(h, id) == 1);
  }
}

TEST_CASE("history validation") {
  const auto a = op(0, 0), b = op(0, 1);
  History good;
  good.events = {hl_invoke(1, a, HlKind::write, val(0, 1)), hl_return(2, a, HlKind::write)};
  CHECK(validate_history(good).ok);

  SUBCASE("steps must increase") {
    History h = good;
    h.events[1].step = 1;
    CHECK_FALSE(validate_history(h).ok);
  }
  SUBCASE("return without invoke") {
    History h;
    h.events = {hl_return(2, a, HlKind::write)};
    CHECK_FALSE(validate_history(h).ok);
  }
  SUBCASE("clients are sequential") {
    History h;
    h.events = {hl_invoke(1, a, HlKind::write, val(0, 1)), hl_invoke(2, b, HlKind::write, val(0, 2))};
    CHECK_FALSE(validate_history(h).ok);
  }
  SUBCASE("respond needs an apply") {
    History h = good;
    Event trig;
    trig.step = 3;
    trig.kind = EventKind::ll_trigger;
    trig.actor = Actor::of(ClientId{0});
    trig.op = op(0, 7);
    trig.parent = a;
    trig.object = ObjectId{0};
    trig.ll_kind = LlKind::reg_read;
    Event resp = trig;
    resp.step = 4;
    resp.kind = EventKind::ll_respond;
    resp.prev = kInitialTagged;
    h.events.push_back(trig);
    h.events.push_back(resp);
    CHECK_FALSE(validate_history(h).ok);
  }
}

TEST_CASE("simulated histories are well formed and round-trip through the trace") {
  for (const char* name : {"casabd_smoke", "crash_1", "adi_f1_k3", "mixed_k2"}) {
    CAPTURE(name);
    auto sc = load_scenario(scenario_path(name));
    auto res = run(sc);
    CHECK(validate_history(res.history).ok);
    const auto text = write_trace(res.history);
    const auto back = parse_trace(text);
    CHECK(back == res.history);
    CHECK(write_trace(back) == text);
  }
}

TEST_CASE("malformed trace lines are rejected") {
  CHECK_THROWS_AS(parse_trace("{\"record\":\"header\"}\nnot json\n"), std::invalid_argument);
}

}  // TEST_SUITE
