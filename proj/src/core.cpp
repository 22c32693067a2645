#include "regemu/core.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <unordered_map>

namespace regemu {

namespace {

std::uint32_t parse_u32(std::string_view text, std::string_view what) {
  std::uint32_t out = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("malformed " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return out;
}

struct OpHash {
  std::size_t operator()(const OpId& id) const {
    return (static_cast<std::size_t>(id.client.value) << 32) ^ id.seq;
  }
};

}  // namespace

std::string to_string(OpId id) {
  return "c" + std::to_string(id.client.value) + "." + std::to_string(id.seq);
}

OpId parse_op_id(std::string_view text) {
  auto dot = text.find('.');
  if (text.empty() || text[0] != 'c' || dot == std::string_view::npos) {
    throw std::invalid_argument("malformed op id: '" + std::string(text) + "'");
  }
  return OpId{ClientId{parse_u32(text.substr(1, dot - 1), "op id")},
              parse_u32(text.substr(dot + 1), "op id")};
}

Ordering compare_timestamps(const Timestamp& a, const Timestamp& b) {
  auto c = a <=> b;
  if (c < 0) return Ordering::less;
  if (c > 0) return Ordering::greater;
  return Ordering::equal;
}

std::string to_string(const Timestamp& ts) {
  return "(" + std::to_string(ts.num) + ",c" + std::to_string(ts.c.value) + ")";
}

std::string to_string(const Value& v) {
  if (v.is_initial()) return "v0";
  return std::to_string(v.payload) + "@c" + std::to_string(v.writer->value) + "#" +
         std::to_string(v.seq);
}

std::string to_string(const TaggedValue& tv) {
  return "(" + to_string(tv.ts) + "," + to_string(tv.val) + ")";
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::hl_invoke: return "hl-invoke";
    case EventKind::hl_return: return "hl-return";
    case EventKind::ll_trigger: return "ll-trigger";
    case EventKind::ll_apply: return "ll-apply";
    case EventKind::ll_respond: return "ll-respond";
    case EventKind::server_crash: return "server-crash";
    case EventKind::client_crash: return "client-crash";
  }
  return "?";
}

EventKind parse_event_kind(std::string_view text) {
  for (auto k : {EventKind::hl_invoke, EventKind::hl_return, EventKind::ll_trigger,
                 EventKind::ll_apply, EventKind::ll_respond, EventKind::server_crash,
                 EventKind::client_crash}) {
    if (to_string(k) == text) return k;
  }
  throw std::invalid_argument("unknown event kind: '" + std::string(text) + "'");
}

std::string_view to_string(HlKind k) { return k == HlKind::read ? "read" : "write"; }

std::string_view to_string(LlKind k) {
  switch (k) {
    case LlKind::cas: return "cas";
    case LlKind::reg_read: return "read";
    case LlKind::reg_write: return "write";
  }
  return "?";
}

std::string_view to_string(AbdoKind k) { return k == AbdoKind::read ? "read" : "update"; }
std::string_view to_string(LinPoint k) { return k == LinPoint::guard ? "guard" : "cas"; }

HlKind parse_hl_kind(std::string_view text) {
  if (text == "read") return HlKind::read;
  if (text == "write") return HlKind::write;
  throw std::invalid_argument("unknown high-level op kind: '" + std::string(text) + "'");
}

LlKind parse_ll_kind(std::string_view text) {
  if (text == "cas") return LlKind::cas;
  if (text == "read") return LlKind::reg_read;
  if (text == "write") return LlKind::reg_write;
  throw std::invalid_argument("unknown low-level op kind: '" + std::string(text) + "'");
}

AbdoKind parse_abdo_kind(std::string_view text) {
  if (text == "read") return AbdoKind::read;
  if (text == "update") return AbdoKind::update;
  throw std::invalid_argument("unknown ABDO op kind: '" + std::string(text) + "'");
}

LinPoint parse_lin_point(std::string_view text) {
  if (text == "guard") return LinPoint::guard;
  if (text == "cas") return LinPoint::cas;
  throw std::invalid_argument("unknown linearization point: '" + std::string(text) + "'");
}

std::string to_string(const Actor& a) {
  return (a.kind == Actor::Kind::client ? "c" : "s") + std::to_string(a.id);
}

Actor parse_actor(std::string_view text) {
  if (text.size() < 2 || (text[0] != 'c' && text[0] != 's')) {
    throw std::invalid_argument("malformed actor: '" + std::string(text) + "'");
  }
  Actor a;
  a.kind = text[0] == 'c' ? Actor::Kind::client : Actor::Kind::server;
  a.id = parse_u32(text.substr(1), "actor");
  return a;
}

namespace {

struct Interval {
  Step invoke = 0;
  std::optional<Step> ret;
  ClientId client;
};

std::unordered_map<OpId, Interval, OpHash> hl_intervals(const History& h) {
  std::unordered_map<OpId, Interval, OpHash> out;
  for (const auto& e : h.events) {
    if (e.kind == EventKind::hl_invoke) {
      out[e.op] = Interval{e.step, std::nullopt, e.op.client};
    } else if (e.kind == EventKind::hl_return) {
      auto it = out.find(e.op);
      if (it != out.end()) it->second.ret = e.step;
    }
  }
  return out;
}

}  // namespace

bool precedes(const History& h, OpId op1, OpId op2) {
  auto iv = hl_intervals(h);
  auto a = iv.find(op1);
  auto b = iv.find(op2);
  if (a == iv.end()) throw std::invalid_argument("unknown op id " + to_string(op1));
  if (b == iv.end()) throw std::invalid_argument("unknown op id " + to_string(op2));
  return a->second.ret.has_value() && *a->second.ret < b->second.invoke;
}

std::uint32_t point_contention(const History& h, OpId op) {
  std::set<ClientId> incomplete;
  bool inside = false;
  std::uint32_t best = 0;
  bool seen = false;
  for (const auto& e : h.events) {
    if (e.kind == EventKind::hl_invoke) {
      incomplete.insert(e.op.client);
      if (e.op == op) {
        inside = true;
        seen = true;
      }
    } else if (e.kind == EventKind::hl_return) {
      if (inside && e.op == op) {
        best = std::max<std::uint32_t>(best, static_cast<std::uint32_t>(incomplete.size()));
        return best;
      }
      incomplete.erase(e.op.client);
    }
    if (inside) best = std::max<std::uint32_t>(best, static_cast<std::uint32_t>(incomplete.size()));
  }
  if (!seen) throw std::invalid_argument("unknown op id " + to_string(op));
  return best;
}

std::uint32_t run_point_contention(const History& h) {
  std::set<ClientId> incomplete;
  std::uint32_t best = 0;
  for (const auto& e : h.events) {
    if (e.kind == EventKind::hl_invoke) incomplete.insert(e.op.client);
    if (e.kind == EventKind::hl_return) incomplete.erase(e.op.client);
    best = std::max<std::uint32_t>(best, static_cast<std::uint32_t>(incomplete.size()));
  }
  return best;
}

ValidationResult validate_history(const History& h) {
  enum class LlState { triggered, applied, responded };
  std::unordered_map<OpId, LlState, OpHash> ll;
  std::unordered_map<OpId, bool, OpHash> hl;  // true while open
  std::map<ClientId, OpId> open_by_client;
  std::optional<Step> last;
  auto fail = [](const Event& e, std::string msg) {
    return ValidationResult{false, std::move(msg) + " (op " + to_string(e.op) + ")", e.step};
  };
  for (const auto& e : h.events) {
    if (last && e.step <= *last) return fail(e, "steps not strictly increasing");
    last = e.step;
    switch (e.kind) {
      case EventKind::hl_invoke: {
        if (hl.count(e.op)) return fail(e, "duplicate hl-invoke");
        if (open_by_client.count(e.op.client)) return fail(e, "overlapping ops on one client");
        hl[e.op] = true;
        open_by_client[e.op.client] = e.op;
        break;
      }
      case EventKind::hl_return: {
        auto it = hl.find(e.op);
        if (it == hl.end() || !it->second) return fail(e, "hl-return without open hl-invoke");
        it->second = false;
        open_by_client.erase(e.op.client);
        break;
      }
      case EventKind::ll_trigger: {
        if (ll.count(e.op)) return fail(e, "duplicate ll-trigger");
        if (!e.object) return fail(e, "ll-trigger without object");
        ll[e.op] = LlState::triggered;
        break;
      }
      case EventKind::ll_apply: {
        auto it = ll.find(e.op);
        if (it == ll.end() || it->second != LlState::triggered)
          return fail(e, "ll-apply without pending ll-trigger");
        it->second = LlState::applied;
        break;
      }
      case EventKind::ll_respond: {
        auto it = ll.find(e.op);
        if (it == ll.end() || it->second != LlState::applied)
          return fail(e, "ll-respond without matching ll-apply");
        it->second = LlState::responded;
        break;
      }
      case EventKind::server_crash:
      case EventKind::client_crash:
        break;
    }
  }
  return {};
}

}  // namespace regemu
