#include "regemu/base.hpp"

#include <algorithm>
#include <string>

namespace regemu {

Placement::Placement(std::map<ObjectId, ServerId> mapping, std::optional<std::uint32_t> capacity)
    : mapping_(std::move(mapping)), capacity_(capacity) {}

Placement Placement::one_object_per_server(std::uint32_t n) {
  std::map<ObjectId, ServerId> m;
  for (std::uint32_t i = 0; i < n; ++i) m[ObjectId{i}] = ServerId{i};
  return Placement(std::move(m));
}

ServerId Placement::server_of(ObjectId o) const {
  auto it = mapping_.find(o);
  if (it == mapping_.end()) {
    throw std::invalid_argument("object " + std::to_string(o.value) + " has no placement");
  }
  return it->second;
}

std::vector<ObjectId> Placement::objects_on(ServerId s) const {
  std::vector<ObjectId> out;
  for (const auto& [o, srv] : mapping_) {
    if (srv == s) out.push_back(o);
  }
  return out;
}

std::set<ServerId> Placement::image(const std::set<ObjectId>& objects) const {
  std::set<ServerId> out;
  for (auto o : objects) out.insert(server_of(o));
  return out;
}

std::set<ObjectId> Placement::preimage(const std::set<ServerId>& servers) const {
  std::set<ObjectId> out;
  for (const auto& [o, s] : mapping_) {
    if (servers.count(s)) out.insert(o);
  }
  return out;
}

void Placement::validate(std::uint32_t servers) const {
  std::uint32_t expect = 0;
  std::map<ServerId, std::uint32_t> load;
  for (const auto& [o, s] : mapping_) {
    if (o.value != expect) {
      throw std::invalid_argument("placement objects must be numbered 0.." +
                                  std::to_string(mapping_.size() - 1));
    }
    ++expect;
    if (s.value >= servers) {
      throw std::invalid_argument("object " + std::to_string(o.value) + " placed on server " +
                                  std::to_string(s.value) + " but only " + std::to_string(servers) +
                                  " servers exist");
    }
    ++load[s];
  }
  if (capacity_) {
    for (const auto& [s, count] : load) {
      if (count > *capacity_) {
        throw std::invalid_argument("server " + std::to_string(s.value) + " hosts " +
                                    std::to_string(count) + " objects, capacity is " +
                                    std::to_string(*capacity_));
      }
    }
  }
}

TaggedValue CasObject::apply(const TaggedValue& expected, const TaggedValue& desired) {
  if (crashed) throw CrashedObjectError("CAS applied to crashed object " + std::to_string(id.value));
  TaggedValue prev = state;
  if (expected == state) state = desired;
  return prev;
}

void RegisterObject::trigger_write(OpId op, const TaggedValue& tv) {
  pending_writes.emplace_back(op, tv);
}

void RegisterObject::apply_write(OpId op) {
  if (crashed) throw CrashedObjectError("write applied to crashed register " + std::to_string(id.value));
  auto it = std::find_if(pending_writes.begin(), pending_writes.end(),
                         [&](const auto& p) { return p.first == op; });
  if (it == pending_writes.end()) {
    throw std::invalid_argument("no pending write " + to_string(op) + " on register " +
                                std::to_string(id.value));
  }
  state = it->second;
  pending_writes.erase(it);
}

TaggedValue RegisterObject::read() const {
  if (crashed) throw CrashedObjectError("read on crashed register " + std::to_string(id.value));
  return state;
}

Storage::Storage(Kind kind, std::uint32_t servers, Placement placement)
    : kind_(kind), placement_(std::move(placement)) {
  placement_.validate(servers);
  for (std::uint32_t s = 0; s < servers; ++s) servers_.push_back(ServerState{ServerId{s}});
  for (const auto& [o, s] : placement_.mapping()) {
    (void)s;
    if (kind == Kind::cas) {
      objects_.emplace_back(CasObject{o});
    } else {
      objects_.emplace_back(RegisterObject{o});
    }
  }
}

bool Storage::object_crashed(ObjectId o) const {
  return std::visit([](const auto& obj) { return obj.crashed; }, objects_.at(o.value));
}

const TaggedValue& Storage::state(ObjectId o) const {
  return std::visit([](const auto& obj) -> const TaggedValue& { return obj.state; },
                    objects_.at(o.value));
}

std::uint32_t Storage::crashed_servers() const {
  return static_cast<std::uint32_t>(
      std::count_if(servers_.begin(), servers_.end(), [](const auto& s) { return s.crashed; }));
}

void Storage::crash_server(ServerId s) {
  auto& srv = servers_.at(s.value);
  if (srv.crashed) {
    throw std::invalid_argument("server " + std::to_string(s.value) + " already crashed");
  }
  srv.crashed = true;
  for (auto o : placement_.objects_on(s)) {
    std::visit([](auto& obj) { obj.crashed = true; }, objects_.at(o.value));
  }
}

}  // namespace regemu
