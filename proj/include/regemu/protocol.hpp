#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "regemu/base.hpp"
#include "regemu/core.hpp"
#include "regemu/state_key.hpp"

namespace regemu {

/// Reference ABD object: read, and update that installs (t, v) iff the stored
/// timestamp is below t. Executed atomically.
class AbdoOracle {
 public:
  void update(const Timestamp& t, const Value& v) {
    if (state_.ts < t) state_ = TaggedValue{t, v};
  }
  TaggedValue read() const { return state_; }
  const TaggedValue& state() const { return state_; }

 private:
  TaggedValue state_ = kInitialTagged;
};

/// ABDO emulated from one CAS object, as seen by one client. Holds the
/// client's cached expected value for that object; one invocation at a time.
class AbdoEmulation {
 public:
  struct CasCall {
    TaggedValue expected;
    TaggedValue desired;
  };

  /// Line-3 guard: nullopt when t <= exp.ts and the update returns at once.
  std::optional<CasCall> begin_update(const Timestamp& t, const Value& v);
  CasCall begin_read();

  /// Response to the in-flight CAS. Returns the next CAS while an update is
  /// still looping, nullopt once the invocation completed.
  std::optional<CasCall> on_response(const TaggedValue& old);

  bool busy() const { return busy_; }
  AbdoKind kind() const { return kind_; }
  const TaggedValue& expected() const { return exp_; }
  void set_expected(const TaggedValue& tv) { exp_ = tv; }

  std::uint32_t failed_cas() const { return failed_; }
  std::uint32_t cas_issued() const { return issued_; }
  /// CAS calls issued with t <= exp.ts; stays 0 when the invariant holds.
  std::uint64_t guard_violations() const { return guard_violations_; }

  void encode(StateKey& key) const;
  friend bool operator==(const AbdoEmulation&, const AbdoEmulation&) = default;

 private:
  CasCall issue();

  TaggedValue exp_ = kInitialTagged;
  bool busy_ = false;
  AbdoKind kind_ = AbdoKind::read;
  Timestamp t_;
  Value v_;
  TaggedValue last_expected_;
  std::uint32_t failed_ = 0;
  std::uint32_t issued_ = 0;
  std::uint64_t guard_violations_ = 0;
};

struct AbdoUpdateStats {
  std::uint32_t cas_issued = 0;
  std::uint32_t failed_cas = 0;
  bool skipped = false;
};

/// Runs a whole ABDO update against obj with every CAS applied immediately.
AbdoUpdateStats run_abdo_update(AbdoEmulation& abdo, CasObject& obj, const Timestamp& t,
                                const Value& v);
TaggedValue run_abdo_read(AbdoEmulation& abdo, CasObject& obj);

/// Per-client id allocator; hl, ll and ABDO ids share the counter.
struct IdSource {
  ClientId client;
  std::uint32_t next = 0;

  OpId make() { return OpId{client, next++}; }
  friend bool operator==(const IdSource&, const IdSource&) = default;
};

struct LlRequest {
  OpId id;
  OpId parent;  // high-level op on whose behalf the request is issued
  ObjectId object;
  LlKind kind = LlKind::cas;
  TaggedValue expected;  // cas
  TaggedValue desired;   // cas new value, register write value
  std::optional<OpId> abdo;

  friend bool operator==(const LlRequest&, const LlRequest&) = default;
};

/// What a client decided during one callback.
struct Effects {
  std::vector<LlRequest> triggers;
  std::vector<AbdoNote> notes;
  bool completed = false;          // high-level op may now return
  std::optional<Value> result;     // read result when completed
};

struct ProtocolDiagnostics {
  std::uint64_t guard_violations = 0;  // CAS issued with t <= exp.ts
  std::uint64_t ts_ties = 0;           // equal timestamps carrying different values

  friend bool operator==(const ProtocolDiagnostics&, const ProtocolDiagnostics&) = default;
};

/// MW-ABD client over n ABDO objects emulated from CAS (CAS-ABD).
class CasAbdClient {
 public:
  CasAbdClient(ClientId self, std::uint32_t objects, std::uint32_t f);

  Effects invoke(OpId hl, HlKind kind, const Value& v, IdSource& ids);
  Effects on_response(OpId ll, ObjectId o, const TaggedValue& ret, IdSource& ids);

  const AbdoEmulation& abdo(ObjectId o) const { return lanes_.at(o.value).abdo; }
  const ProtocolDiagnostics& diagnostics() const { return diag_; }
  bool idle() const { return !current_; }
  void encode(StateKey& key) const;

  friend bool operator==(const CasAbdClient&, const CasAbdClient&) = default;

 private:
  enum class Phase { collect, update };

  struct Queued {
    AbdoKind kind = AbdoKind::read;
    OpId hl;
    Phase phase = Phase::collect;
    Timestamp t;
    Value v;
    friend bool operator==(const Queued&, const Queued&) = default;
  };

  struct Active {
    OpId id;
    OpId hl;
    Phase phase = Phase::collect;
    OpId ll;
    friend bool operator==(const Active&, const Active&) = default;
  };

  struct Lane {
    AbdoEmulation abdo;
    std::optional<Active> active;
    std::deque<Queued> queue;
    friend bool operator==(const Lane&, const Lane&) = default;
  };

  struct Current {
    OpId id;
    HlKind kind = HlKind::read;
    Value value;
    Phase phase = Phase::collect;
    std::uint32_t responses = 0;
    std::optional<TaggedValue> best;
    TaggedValue chosen;
    bool completed = false;
    friend bool operator==(const Current&, const Current&) = default;
  };

  void enqueue(ObjectId o, Queued q, Effects& out, IdSource& ids);
  void pump(ObjectId o, Effects& out, IdSource& ids);
  void round_response(OpId hl, Phase phase, const std::optional<TaggedValue>& observed,
                      Effects& out, IdSource& ids);
  void trigger(ObjectId o, const AbdoEmulation::CasCall& call, Effects& out, IdSource& ids);

  ClientId self_;
  std::uint32_t f_ = 0;
  std::vector<Lane> lanes_;
  std::optional<Current> current_;
  ProtocolDiagnostics diag_;
};

/// Per-writer slot layout of the baseline: client c owns objects
/// [c(2f+1), (c+1)(2f+1)).
struct BaselineLayout {
  std::uint32_t clients = 0;
  std::uint32_t f = 0;

  std::uint32_t slot_size() const { return 2 * f + 1; }
  std::uint32_t object_count() const { return clients * slot_size(); }
  std::vector<ObjectId> slot(ClientId c) const;
  ClientId owner(ObjectId o) const { return ClientId{o.value / slot_size()}; }

  /// Replica r of client c on server (c(2f+1) + r) mod n; slot replicas land
  /// on distinct servers whenever n >= 2f+1.
  Placement default_placement(std::uint32_t servers) const;
  /// Throws std::invalid_argument unless slots are disjoint and each slot
  /// spans 2f+1 distinct servers.
  void validate(const Placement& p) const;

  friend bool operator==(const BaselineLayout&, const BaselineLayout&) = default;
};

/// Baseline read/write emulation over plain registers with dedicated
/// per-writer slots. Write: collect f+1 replies from every slot, pick
/// ts = (max num + 1, self), write own slot, await f+1 acks. Read: collect
/// f+1 replies from every slot, return the max-ts value.
class BaselineClient {
 public:
  BaselineClient(ClientId self, BaselineLayout layout);

  Effects invoke(OpId hl, HlKind kind, const Value& v, IdSource& ids);
  Effects on_response(OpId ll, ObjectId o, const TaggedValue& ret, IdSource& ids);

  const ProtocolDiagnostics& diagnostics() const { return diag_; }
  void encode(StateKey& key) const;

  friend bool operator==(const BaselineClient&, const BaselineClient&) = default;

 private:
  enum class Phase { collect, store };

  ClientId self_;
  BaselineLayout layout_;
  std::optional<OpId> op_;
  HlKind kind_ = HlKind::read;
  Value value_;
  Phase phase_ = Phase::collect;
  std::vector<OpId> round_ops_;
  std::vector<std::uint32_t> slot_replies_;
  std::uint32_t acks_ = 0;
  std::optional<TaggedValue> best_;
  bool completed_ = false;
  ProtocolDiagnostics diag_;
};

}  // namespace regemu
