#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "regemu/core.hpp"
#include "regemu/scenario.hpp"
#include "regemu/sim.hpp"

namespace regemu {

enum class Verdict { pass, fail, inapplicable, partial };
std::string_view to_string(Verdict v);

/// One high-level operation. `value` is the written value for writes and the
/// returned value for completed reads.
struct HlOp {
  OpId id;
  HlKind kind = HlKind::read;
  std::optional<Value> value;
  Step invoke = 0;
  std::optional<Step> ret;

  bool complete() const { return ret.has_value(); }
};

struct HlHistory {
  std::vector<HlOp> ops;  // in invocation order
};

HlHistory project(const History& h);

struct LinResult {
  Verdict verdict = Verdict::pass;
  std::string witness;
  std::vector<OpId> witness_ops;
  std::vector<OpId> linearization;  // on pass
};

/// Searches for a precedence-respecting total order in which every read
/// returns the latest preceding write (or v0). Pending writes may be placed
/// anywhere after their invocation or left out; pending reads are left out.
/// Histories with two writes of the same value are refused (inapplicable).
LinResult check_linearizable(const HlHistory& h);

/// Writes must not overlap (otherwise inapplicable). Every read overlapping
/// no write must return the last preceding write, or v0.
LinResult check_sw_safety(const HlHistory& h);

struct LinpointResult {
  Verdict verdict = Verdict::pass;
  std::string witness;
  std::uint64_t replayed = 0;
  std::uint64_t excluded = 0;          // ABDO ops with no identifiable point
  std::uint64_t state_mismatches = 0;  // CAS apply whose prev differs from the oracle state
  std::uint64_t return_mismatches = 0;
  std::uint64_t read_obstructions = 0; // read CAS that changed the object
};

/// Replays every ABDO operation at its linearization point through the
/// sequential ABDO object, per object, and compares returns and states.
LinpointResult check_abdo_linpoints(const History& h);

struct TsUniquenessResult {
  Verdict verdict = Verdict::pass;
  std::string witness;
  std::uint64_t groups = 0;           // distinct (object, ts) pairs updated
  std::uint64_t conflicting = 0;      // groups with two different values
  std::uint64_t max_multiplicity = 0; // raw invocations sharing one (object, ts)
};

TsUniquenessResult check_ts_uniqueness(const History& h);

struct ObjectBound {
  OpId op;
  ObjectId object;
  std::uint32_t cas_issued = 0;
  std::uint32_t failed = 0;
  std::uint64_t bound = 0;
  Step update_invoke = 0;
  std::vector<OpId> obstructors;  // in order of obstruction
};

struct OpBound {
  OpId op;
  HlKind kind = HlKind::read;
  bool complete = false;
  std::uint32_t pnt_cont = 0;
  std::optional<Timestamp> ts;
  std::optional<Step> update_start;
  std::uint32_t rounds = 0;
  std::uint32_t max_failed = 0;
  std::uint64_t total_failed = 0;
  std::uint64_t total_cas = 0;
};

struct BoundsReport {
  std::vector<OpBound> ops;
  std::vector<ObjectBound> per_object;
  std::uint64_t obstruction_violations = 0;
  std::uint64_t tsgap_pairs = 0;
  std::uint64_t tsgap_violations = 0;
  std::uint64_t early_obstructor_violations = 0;
  std::uint64_t repeat_obstructor_violations = 0;
  std::uint64_t same_num_violations = 0;
  std::uint64_t guard_violations = 0;
  std::uint64_t monotonic_violations = 0;
  std::string witness;

  std::uint32_t max_failed() const;
  bool ok() const;
};

std::uint64_t obstruction_bound(std::uint32_t pnt_cont);

BoundsReport check_bounds(const History& h);

/// Distinct base objects touched by any low-level event.
std::uint64_t resource_consumption(const History& h);

struct AdiEpoch {
  std::uint32_t epoch = 0;
  OpId writer;
  Step start = 0;  // t_{i-1}
  Step end = 0;    // t_i
  std::size_t cov_size = 0;
  std::size_t cov_in_f = 0;
};

struct AdiReport {
  Verdict verdict = Verdict::pass;
  std::string witness;
  std::vector<AdiEpoch> epochs;
  std::uint64_t conformance_violations = 0;
  std::uint64_t q_monotonicity_violations = 0;
  std::uint32_t max_point_contention = 0;
};

/// Replays a covering-adversary history: withheld applies must not occur
/// during their epoch, Q_i never shrinks, and every epoch end has
/// |Cov(t_i)| >= i*f with no covered register on F.
AdiReport check_adi(const History& h);

struct SimpleResult {
  Verdict verdict = Verdict::pass;
  std::string witness;
  std::uint64_t count = 0;
};

/// No apply or respond on an object after its server crashed.
SimpleResult check_crash_containment(const History& h);

/// Unless the run hit its budget, every trigger on a never-crashed object by
/// a never-crashed client has a response.
SimpleResult check_fairness(const History& h);

struct CheckOutcome {
  std::string name;
  Verdict verdict = Verdict::pass;
  std::string witness;
  std::map<std::string, std::string> metrics;
};

/// Runs the named checkers. Known names: wellformed, lin, sw, linpoints, ts,
/// bounds, resource, adi, crash, fairness. Unknown names throw ConfigError.
std::vector<CheckOutcome> run_checks(const History& h, const std::vector<std::string>& names);
std::vector<std::string> default_checks(const History& h);
std::vector<std::string> all_check_names();

struct EnumOptions {
  std::uint64_t state_cap = 2'000'000;
  std::uint64_t depth = 400;
  std::uint32_t max_crashes = 0;  // server crashes injected at any step
  bool reduce = true;             // trigger-first and crash-last orderings
};

struct EnumResult {
  Verdict verdict = Verdict::pass;
  std::string witness;
  double interleavings = 0;     // complete schedules explored
  std::uint64_t states = 0;     // distinct states visited
  std::uint64_t terminals = 0;  // distinct terminal states audited
  std::uint64_t outcomes = 0;   // distinct (high-level event order, final object states) at terminals
  std::uint64_t max_depth = 0;
  std::uint64_t violations = 0;
  bool capped = false;
  bool depth_exceeded = false;
  std::uint64_t unfair_excluded = 0;
};

/// Explores every schedule of a tiny scenario and audits each terminal state.
EnumResult exhaustive_check(const Scenario& sc, const EnumOptions& opt = {});

}  // namespace regemu
