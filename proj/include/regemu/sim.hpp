#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "regemu/base.hpp"
#include "regemu/core.hpp"
#include "regemu/protocol.hpp"
#include "regemu/scenario.hpp"

namespace regemu {

enum class ActionKind { invoke, trigger, ret, apply, respond, crash_server, crash_client };

/// One schedulable step. `target` is a client or server id; `op` names the
/// low-level op for apply/respond.
struct Action {
  ActionKind kind = ActionKind::invoke;
  std::uint32_t target = 0;
  OpId op;

  friend auto operator<=>(const Action&, const Action&) = default;
};

std::string to_string(const Action& a);

enum class LlState { queued, triggered, applied };

struct LlOp {
  OpId id;
  OpId parent;
  ObjectId object;
  LlKind kind = LlKind::cas;
  TaggedValue expected;
  TaggedValue desired;
  std::optional<OpId> abdo;
  LlState state = LlState::queued;
  TaggedValue result;  // state observed at apply

  friend bool operator==(const LlOp&, const LlOp&) = default;
};

struct WorldDiagnostics {
  std::uint64_t guard_violations = 0;     // CAS with t <= exp.ts
  std::uint64_t monotonic_violations = 0; // stored timestamp decreased on a CAS apply
  std::uint64_t ts_ties = 0;

  bool clean() const { return guard_violations == 0 && monotonic_violations == 0 && ts_ties == 0; }
};

/// Configuration plus the mutable state of every client and base object.
/// Copyable; performing an action appends to the history.
class World {
 public:
  enum class Recording { full, high_level_only };

  World(const Scenario& sc, std::vector<WorkloadOp> workload, Recording rec = Recording::full);

  Step step() const { return step_; }
  const Storage& storage() const { return storage_; }
  const History& history() const { return history_; }
  History& history() { return history_; }
  const std::map<OpId, LlOp>& ll_ops() const { return ll_; }
  std::uint32_t clients() const { return static_cast<std::uint32_t>(clients_.size()); }
  bool client_crashed(ClientId c) const { return clients_.at(c.value).crashed; }
  bool client_busy(ClientId c) const { return clients_.at(c.value).current.has_value(); }
  bool client_has_outbox(ClientId c) const { return !clients_.at(c.value).outbox.empty(); }
  bool workload_left(ClientId c) const;
  const Scenario& scenario() const { return *scenario_; }

  /// Enabled actions in canonical order (clients by id, then low-level ops by
  /// id). Crash actions are never listed; policies inject them.
  std::vector<Action> enabled() const;
  void perform(const Action& a);

  /// Some client has an unreturned op or unissued workload (ignoring crashed clients).
  bool has_pending_high_level() const;
  std::vector<OpId> pending_high_level() const;

  WorldDiagnostics diagnostics() const;

  /// Cov(t) now: registers with a triggered, unapplied write on a live object.
  std::set<ObjectId> covered() const;

  /// Digest of the mutable state minus the step counter; equal digests mean
  /// equal futures up to a renaming of low-level op ids (barring a 128-bit
  /// collision). Covers the high-level event sequence.
  StateDigest state_key() const;

 private:
  using Proto = std::variant<CasAbdClient, BaselineClient>;

  struct ClientRuntime {
    Proto proto;
    IdSource ids;
    std::deque<OpId> outbox;
    std::optional<OpId> current;
    HlKind kind = HlKind::read;
    bool ready = false;
    std::optional<Value> result;
    std::size_t next_op = 0;
    std::uint64_t write_seq = 0;
    bool crashed = false;
  };

  void absorb(ClientRuntime& cr, Effects&& fx, Event& ev);
  void record(Event ev);

  const Scenario* scenario_;
  Recording recording_;
  Storage storage_;
  std::vector<std::vector<WorkloadOp>> per_client_;
  std::vector<ClientRuntime> clients_;
  std::map<OpId, LlOp> ll_;
  History history_;
  Step step_ = 0;
  std::uint64_t monotonic_violations_ = 0;
};

/// Chooses the next action. Returning nullopt ends the run.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::optional<Action> choose(const World& w, const std::vector<Action>& enabled) = 0;
  virtual void observe(const World& /*w*/, const Action& /*done*/) {}
};

/// Seeded random choice with a deferral bound: an enabled action that has
/// waited d_max scheduling opportunities is taken (oldest first).
class RandomPolicy : public Policy {
 public:
  RandomPolicy(std::uint64_t seed, std::uint64_t d_max, bool fair, ActionWeights weights,
               std::vector<CrashSpec> crashes = {});
  std::optional<Action> choose(const World& w, const std::vector<Action>& enabled) override;
  /// Choice among `candidates` only, honouring the deferral bound.
  std::optional<Action> pick(const World& w, const std::vector<Action>& candidates);

 protected:
  std::optional<Action> scheduled_crash(const World& w);

  std::mt19937_64 rng_;
  std::uint64_t d_max_;
  bool fair_;
  ActionWeights weights_;
  std::vector<CrashSpec> crashes_;
  std::size_t next_crash_ = 0;
  std::map<Action, Step> waiting_since_;
};

/// Oldest enabled action first: every action is served at its first
/// opportunity, so rounds complete in lockstep.
class SyncPolicy : public RandomPolicy {
 public:
  explicit SyncPolicy(std::vector<CrashSpec> crashes = {});
  std::optional<Action> choose(const World& w, const std::vector<Action>& enabled) override;
};

/// Covering-adversary bookkeeping for epoch i.
struct AdiState {
  std::set<ServerId> faulty;            // F
  std::uint32_t epoch = 0;              // i (1-based once started)
  Step epoch_start = 0;                 // t_{i-1}
  std::set<ClientId> completed;         // C(t_{i-1})
  std::set<ObjectId> cov_before;        // Cov(t_{i-1})
  std::set<ObjectId> triggered;         // Tr_i(t)
  std::set<ObjectId> cov_new;           // Cov_i(t)
  std::set<ServerId> q;                 // Q_i(t)
};

struct EpochRecord {
  std::uint32_t epoch = 0;
  Step end_step = 0;                    // t_i
  Step return_step = 0;                 // t_r
  std::size_t cov_size = 0;             // |Cov(t_i)|
  std::set<ObjectId> cov;
  std::set<ServerId> cov_servers_in_f;  // delta(Cov(t_i)) ∩ F
  std::size_t q_size = 0;               // |Q_i(t_i)|
  std::size_t fresh_servers = 0;        // |delta(Tr_i(t_r) \ Cov(t_{i-1}))|
  std::uint32_t point_contention = 0;   // max over the epoch
};

/// Runs the covering construction: writers invoked one after another; during
/// epoch i applies of covering writes by clients in C(t_{i-1}) and on
/// registers in delta^-1(Q_i(t)) are withheld; after W_i returns every other
/// enabled action drains (releasing writes on delta^-1(F)) and t_i is taken.
class AdiPolicy : public Policy {
 public:
  AdiPolicy(std::uint64_t seed, std::set<ServerId> faulty, std::uint32_t f, std::uint64_t d_max);

  std::optional<Action> choose(const World& w, const std::vector<Action>& enabled) override;
  void observe(const World& w, const Action& done) override;

  const std::vector<EpochRecord>& epochs() const { return epochs_; }
  const AdiState& state() const { return state_; }
  std::uint64_t q_monotonicity_violations() const { return q_violations_; }
  /// Whether the apply of `op` is withheld under the current epoch's rules.
  bool prevented(const World& w, const LlOp& op) const;

 private:
  enum class Phase { idle, epoch, release };

  void refresh_q(const World& w);

  RandomPolicy chooser_;
  std::uint32_t f_;
  AdiState state_;
  Phase phase_ = Phase::idle;
  std::optional<ClientId> writer_;
  std::uint32_t next_writer_ = 0;
  std::vector<EpochRecord> epochs_;
  Step return_step_ = 0;
  std::size_t fresh_at_return_ = 0;
  std::uint32_t epoch_contention_ = 0;
  std::uint64_t q_violations_ = 0;
};

struct RunResult {
  History history;
  WorldDiagnostics diagnostics;
  std::vector<EpochRecord> epochs;         // covering adversary only
  std::uint64_t q_monotonicity_violations = 0;
  std::vector<OpId> pending;               // unreturned high-level ops
};

std::unique_ptr<Policy> make_policy(const Scenario& sc, std::uint64_t seed);

/// Executes the scenario with the given seed (the scenario's own seed when
/// unset). Deterministic: same inputs, same history.
RunResult run(const Scenario& sc, std::optional<std::uint64_t> seed = std::nullopt);

/// Cov(t) reconstructed from trigger/apply/crash events up to and including step t.
std::set<ObjectId> measure_cov(const History& h, Step t);

}  // namespace regemu
