#pragma once

#include <string>

#include "regemu/core.hpp"
#include "regemu/scenario.hpp"
#include "regemu/verify.hpp"

namespace regemu::testing {

inline Value val(std::uint32_t writer, std::uint64_t seq) { return Value{seq * 10 + writer, ClientId{writer}, seq}; }

inline OpId op(std::uint32_t client, std::uint32_t seq) { return OpId{ClientId{client}, seq}; }

inline Event hl_invoke(Step step, OpId id, HlKind kind, std::optional<Value> v = std::nullopt) {
  Event e;
  e.step = step;
  e.kind = EventKind::hl_invoke;
  e.actor = Actor::of(id.client);
  e.op = id;
  e.hl_kind = kind;
  if (kind == HlKind::write) e.value = v;
  return e;
}

inline Event hl_return(Step step, OpId id, HlKind kind, std::optional<Value> v = std::nullopt) {
  Event e;
  e.step = step;
  e.kind = EventKind::hl_return;
  e.actor = Actor::of(id.client);
  e.op = id;
  e.hl_kind = kind;
  if (kind == HlKind::read) e.value = v;
  return e;
}

inline HlOp write_op(OpId id, Value v, Step invoke, std::optional<Step> ret) {
  HlOp o;
  o.id = id;
  o.kind = HlKind::write;
  o.value = v;
  o.invoke = invoke;
  o.ret = ret;
  return o;
}

inline HlOp read_op(OpId id, std::optional<Value> v, Step invoke, std::optional<Step> ret) {
  HlOp o;
  o.id = id;
  o.kind = HlKind::read;
  o.value = v;
  o.invoke = invoke;
  o.ret = ret;
  return o;
}

inline std::string scenario_path(const std::string& name) {
  return std::string(REGEMU_SCENARIO_DIR) + "/" + name + ".yaml";
}

}  // namespace regemu::testing
