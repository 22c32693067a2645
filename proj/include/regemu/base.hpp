#pragma once

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <variant>
#include <vector>

#include "regemu/core.hpp"

namespace regemu {

/// The placement function delta: every object lives on exactly one server.
class Placement {
 public:
  Placement() = default;
  explicit Placement(std::map<ObjectId, ServerId> mapping,
                     std::optional<std::uint32_t> capacity = std::nullopt);

  static Placement one_object_per_server(std::uint32_t n);

  ServerId server_of(ObjectId o) const;
  std::vector<ObjectId> objects_on(ServerId s) const;
  std::set<ServerId> image(const std::set<ObjectId>& objects) const;
  std::set<ObjectId> preimage(const std::set<ServerId>& servers) const;

  std::size_t size() const { return mapping_.size(); }
  const std::map<ObjectId, ServerId>& mapping() const { return mapping_; }
  std::optional<std::uint32_t> capacity() const { return capacity_; }

  /// Throws std::invalid_argument if objects are not dense 0..size-1, a
  /// server id is out of range, or a server exceeds the declared capacity.
  void validate(std::uint32_t servers) const;

 private:
  std::map<ObjectId, ServerId> mapping_;
  std::optional<std::uint32_t> capacity_;
};

/// Thrown when an operation reaches an object after its server crashed. The
/// simulator never does this; it keeps such operations pending instead.
class CrashedObjectError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct CasObject {
  ObjectId id;
  TaggedValue state = kInitialTagged;
  bool crashed = false;

  /// Atomic compare-and-swap; returns the pre-apply state.
  TaggedValue apply(const TaggedValue& expected, const TaggedValue& desired);

  friend bool operator==(const CasObject&, const CasObject&) = default;
};

/// Plain MWMR atomic register. A triggered write covers the register until it
/// is applied or the server crashes.
struct RegisterObject {
  ObjectId id;
  TaggedValue state = kInitialTagged;
  bool crashed = false;
  std::vector<std::pair<OpId, TaggedValue>> pending_writes;

  void trigger_write(OpId op, const TaggedValue& tv);
  /// Unconditional overwrite; throws std::invalid_argument for unknown op.
  void apply_write(OpId op);
  TaggedValue read() const;
  bool covered() const { return !crashed && !pending_writes.empty(); }

  friend bool operator==(const RegisterObject&, const RegisterObject&) = default;
};

using BaseObject = std::variant<CasObject, RegisterObject>;

struct ServerState {
  ServerId id;
  bool crashed = false;

  friend bool operator==(const ServerState&, const ServerState&) = default;
};

/// Servers and the objects mapped onto them.
class Storage {
 public:
  enum class Kind { cas, registers };

  Storage() = default;
  Storage(Kind kind, std::uint32_t servers, Placement placement);

  Kind kind() const { return kind_; }
  const Placement& placement() const { return placement_; }
  std::size_t object_count() const { return objects_.size(); }
  std::uint32_t server_count() const { return static_cast<std::uint32_t>(servers_.size()); }

  BaseObject& object(ObjectId o) { return objects_.at(o.value); }
  const BaseObject& object(ObjectId o) const { return objects_.at(o.value); }
  CasObject& cas(ObjectId o) { return std::get<CasObject>(objects_.at(o.value)); }
  RegisterObject& reg(ObjectId o) { return std::get<RegisterObject>(objects_.at(o.value)); }

  bool object_crashed(ObjectId o) const;
  bool server_crashed(ServerId s) const { return servers_.at(s.value).crashed; }
  const TaggedValue& state(ObjectId o) const;
  std::uint32_t crashed_servers() const;

  /// Marks s and every object in delta^-1(s) crashed. Throws
  /// std::invalid_argument if s is already crashed.
  void crash_server(ServerId s);

  friend bool operator==(const Storage&, const Storage&) = default;

 private:
  Kind kind_ = Kind::cas;
  Placement placement_;
  std::vector<ServerState> servers_;
  std::vector<BaseObject> objects_;
};

inline bool operator==(const Placement& a, const Placement& b) {
  return a.mapping() == b.mapping() && a.capacity() == b.capacity();
}

}  // namespace regemu
