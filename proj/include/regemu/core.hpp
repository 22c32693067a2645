#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace regemu {

/// Dense natural identifier, distinct type per domain concept.
template <class Tag>
struct Id {
  std::uint32_t value = 0;

  constexpr Id() = default;
  constexpr explicit Id(std::uint32_t v) : value(v) {}

  friend constexpr auto operator<=>(Id, Id) = default;
};

struct ClientTag {};
struct ServerTag {};
struct ObjectTag {};

using ClientId = Id<ClientTag>;
using ServerId = Id<ServerTag>;
using ObjectId = Id<ObjectTag>;

using Step = std::uint64_t;

/// Operation identifier. Ids are allocated from a per-client counter shared by
/// high-level ops, low-level ops and ABDO invocations of that client.
struct OpId {
  ClientId client;
  std::uint32_t seq = 0;

  friend constexpr auto operator<=>(const OpId&, const OpId&) = default;
};

std::string to_string(OpId id);
OpId parse_op_id(std::string_view text);

/// Logical clock of the register emulations; ordered lexicographically.
struct Timestamp {
  std::uint64_t num = 0;
  ClientId c;

  friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

enum class Ordering { less, equal, greater };

Ordering compare_timestamps(const Timestamp& a, const Timestamp& b);

/// Written values are unique per run: (writer, seq) is never reused. The
/// initial value v0 has no writer.
struct Value {
  std::uint64_t payload = 0;
  std::optional<ClientId> writer;
  std::uint64_t seq = 0;

  bool is_initial() const { return !writer.has_value(); }
  friend bool operator==(const Value&, const Value&) = default;
};

inline constexpr Value kInitialValue{};

struct TaggedValue {
  Timestamp ts;
  Value val;

  friend bool operator==(const TaggedValue&, const TaggedValue&) = default;
};

inline const TaggedValue kInitialTagged{Timestamp{0, ClientId{0}}, kInitialValue};

std::string to_string(const Timestamp& ts);
std::string to_string(const Value& v);
std::string to_string(const TaggedValue& tv);

enum class EventKind {
  hl_invoke,
  hl_return,
  ll_trigger,
  ll_apply,
  ll_respond,
  server_crash,
  client_crash,
};

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

enum class HlKind { read, write };
enum class LlKind { cas, reg_read, reg_write };
enum class AbdoKind { read, update };
/// Where an ABDO update took effect: the line-3 guard or the CAS satisfying line 6.
enum class LinPoint { guard, cas };

std::string_view to_string(HlKind k);
std::string_view to_string(LlKind k);
std::string_view to_string(AbdoKind k);
std::string_view to_string(LinPoint k);
HlKind parse_hl_kind(std::string_view text);
LlKind parse_ll_kind(std::string_view text);
AbdoKind parse_abdo_kind(std::string_view text);
LinPoint parse_lin_point(std::string_view text);

struct Actor {
  enum class Kind { client, server } kind = Kind::client;
  std::uint32_t id = 0;

  static Actor of(ClientId c) { return {Kind::client, c.value}; }
  static Actor of(ServerId s) { return {Kind::server, s.value}; }
  friend bool operator==(const Actor&, const Actor&) = default;
};

std::string to_string(const Actor& a);
Actor parse_actor(std::string_view text);

/// ABDO-level transition computed by a client during some event's step.
struct AbdoNote {
  OpId id;
  bool invoke = true;  // false: return
  AbdoKind kind = AbdoKind::read;
  ObjectId object;
  OpId hl;
  std::optional<Timestamp> ts;     // update invoke
  std::optional<Value> val;        // update invoke
  std::optional<TaggedValue> ret;  // read return
  std::optional<LinPoint> lp;      // update return

  friend bool operator==(const AbdoNote&, const AbdoNote&) = default;
};

struct Event {
  Step step = 0;
  EventKind kind = EventKind::hl_invoke;
  Actor actor;
  OpId op;

  // hl-invoke / hl-return
  std::optional<HlKind> hl_kind;
  std::optional<Value> value;  // written value on invoke, returned value on return

  // ll-*
  std::optional<OpId> parent;  // owning high-level op
  std::optional<ObjectId> object;
  std::optional<LlKind> ll_kind;
  std::optional<OpId> abdo;              // trigger of a CAS issued by an ABDO op
  std::optional<TaggedValue> expected;   // cas trigger
  std::optional<TaggedValue> desired;    // cas trigger, register write trigger
  std::optional<TaggedValue> prev;       // apply: state before; respond: returned value
  std::optional<TaggedValue> after;      // apply: state after

  // server-crash
  std::optional<ServerId> server;

  std::vector<AbdoNote> abdo_notes;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Static description of the run a history came from.
struct RunHeader {
  std::string scenario;
  std::string algorithm;
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  std::uint32_t k = 0;
  std::uint64_t seed = 0;
  std::string policy;
  std::map<ObjectId, ServerId> placement;
  std::vector<ServerId> faulty_set;  // F, covering adversary only
  std::optional<ClientId> reader;

  friend bool operator==(const RunHeader&, const RunHeader&) = default;
};

struct History {
  RunHeader header;
  std::vector<Event> events;
  bool truncated = false;
  std::string truncation_reason;  // "budget" or "stalled"
  Step steps = 0;

  friend bool operator==(const History&, const History&) = default;
};

/// True iff op1 returns before op2 is invoked. Throws std::invalid_argument for
/// ids without an hl-invoke in h.
bool precedes(const History& h, OpId op1, OpId op2);

/// Maximum number of clients with an incomplete high-level op at any prefix
/// between op's invocation and its return (or the end of h).
std::uint32_t point_contention(const History& h, OpId op);

/// Maximum point contention over the whole run.
std::uint32_t run_point_contention(const History& h);

struct ValidationResult {
  bool ok = true;
  std::string message;
  std::optional<Step> at;
};

/// Checks the Event/History invariants: strictly increasing steps, matching
/// trigger/apply/respond and invoke/return, sequential clients.
ValidationResult validate_history(const History& h);

}  // namespace regemu
