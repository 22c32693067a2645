#include "regemu/protocol.hpp"

#include <algorithm>
#include <string>

namespace regemu {

// ---------------------------------------------------------------------------
// ABDO from a single CAS object

std::optional<AbdoEmulation::CasCall> AbdoEmulation::begin_update(const Timestamp& t,
                                                                  const Value& v) {
  if (busy_) throw std::logic_error("ABDO invocation while another is in flight");
  kind_ = AbdoKind::update;
  t_ = t;
  v_ = v;
  failed_ = 0;
  issued_ = 0;
  if (!(t > exp_.ts)) return std::nullopt;
  busy_ = true;
  return issue();
}

AbdoEmulation::CasCall AbdoEmulation::begin_read() {
  if (busy_) throw std::logic_error("ABDO invocation while another is in flight");
  kind_ = AbdoKind::read;
  failed_ = 0;
  issued_ = 1;
  busy_ = true;
  last_expected_ = exp_;
  return CasCall{exp_, exp_};
}

AbdoEmulation::CasCall AbdoEmulation::issue() {
  if (!(t_ > exp_.ts)) ++guard_violations_;
  ++issued_;
  last_expected_ = exp_;
  return CasCall{exp_, TaggedValue{t_, v_}};
}

std::optional<AbdoEmulation::CasCall> AbdoEmulation::on_response(const TaggedValue& old) {
  if (!busy_) throw std::logic_error("CAS response without an ABDO invocation");
  if (kind_ == AbdoKind::read) {
    exp_ = old;
    busy_ = false;
    return std::nullopt;
  }
  const bool succeeded = old == last_expected_;
  if (!succeeded) ++failed_;
  const bool done = succeeded || old.ts >= t_;
  exp_ = old;
  if (done) {
    busy_ = false;
    return std::nullopt;
  }
  return issue();
}

void AbdoEmulation::encode(StateKey& key) const {
  // The per-invocation counters never influence a later step; the remaining
  // invocation fields only matter while one is in flight.
  key.put(exp_);
  key.put(busy_);
  key.put(guard_violations_ > 0);
  if (!busy_) return;
  key.put(kind_);
  key.put(t_);
  key.put(v_);
  key.put(last_expected_);
}

AbdoUpdateStats run_abdo_update(AbdoEmulation& abdo, CasObject& obj, const Timestamp& t,
                                const Value& v) {
  AbdoUpdateStats stats;
  auto call = abdo.begin_update(t, v);
  if (!call) {
    stats.skipped = true;
    return stats;
  }
  while (call) {
    auto old = obj.apply(call->expected, call->desired);
    call = abdo.on_response(old);
  }
  stats.cas_issued = abdo.cas_issued();
  stats.failed_cas = abdo.failed_cas();
  return stats;
}

TaggedValue run_abdo_read(AbdoEmulation& abdo, CasObject& obj) {
  auto call = abdo.begin_read();
  auto old = obj.apply(call.expected, call.desired);
  abdo.on_response(old);
  return old;
}

// ---------------------------------------------------------------------------
// CAS-ABD client

CasAbdClient::CasAbdClient(ClientId self, std::uint32_t objects, std::uint32_t f)
    : self_(self), f_(f), lanes_(objects) {
  if (objects <= 2 * f) throw std::invalid_argument("CAS-ABD needs more than 2f objects");
}

Effects CasAbdClient::invoke(OpId hl, HlKind kind, const Value& v, IdSource& ids) {
  if (current_ && !current_->completed) {
    throw std::logic_error("client " + std::to_string(self_.value) + " already has a pending op");
  }
  Effects out;
  current_ = Current{};
  current_->id = hl;
  current_->kind = kind;
  current_->value = v;
  for (std::uint32_t i = 0; i < lanes_.size(); ++i) {
    enqueue(ObjectId{i}, Queued{AbdoKind::read, hl, Phase::collect, {}, {}}, out, ids);
  }
  return out;
}

void CasAbdClient::trigger(ObjectId o, const AbdoEmulation::CasCall& call, Effects& out,
                           IdSource& ids) {
  auto& lane = lanes_.at(o.value);
  LlRequest req;
  req.id = ids.make();
  req.object = o;
  req.kind = LlKind::cas;
  req.expected = call.expected;
  req.desired = call.desired;
  req.parent = lane.active->hl;
  req.abdo = lane.active->id;
  lane.active->ll = req.id;
  out.triggers.push_back(req);
}

void CasAbdClient::enqueue(ObjectId o, Queued q, Effects& out, IdSource& ids) {
  lanes_.at(o.value).queue.push_back(q);
  pump(o, out, ids);
}

void CasAbdClient::pump(ObjectId o, Effects& out, IdSource& ids) {
  auto& lane = lanes_.at(o.value);
  while (!lane.active && !lane.queue.empty()) {
    Queued q = lane.queue.front();
    lane.queue.pop_front();
    AbdoNote inv;
    inv.id = ids.make();
    inv.invoke = true;
    inv.kind = q.kind;
    inv.object = o;
    inv.hl = q.hl;
    if (q.kind == AbdoKind::read) {
      out.notes.push_back(inv);
      lane.active = Active{inv.id, q.hl, q.phase, {}};
      trigger(o, lane.abdo.begin_read(), out, ids);
      return;
    }
    inv.ts = q.t;
    inv.val = q.v;
    out.notes.push_back(inv);
    auto before = lane.abdo.guard_violations();
    auto call = lane.abdo.begin_update(q.t, q.v);
    if (call) {
      lane.active = Active{inv.id, q.hl, q.phase, {}};
      trigger(o, *call, out, ids);
      diag_.guard_violations += lane.abdo.guard_violations() - before;
      return;
    }
    AbdoNote ret = inv;
    ret.invoke = false;
    ret.ts.reset();
    ret.val.reset();
    ret.lp = LinPoint::guard;
    out.notes.push_back(ret);
    round_response(q.hl, q.phase, std::nullopt, out, ids);
  }
}

Effects CasAbdClient::on_response(OpId ll, ObjectId o, const TaggedValue& ret, IdSource& ids) {
  Effects out;
  auto& lane = lanes_.at(o.value);
  if (!lane.active || lane.active->ll != ll) {
    throw std::logic_error("unexpected response " + to_string(ll) + " on object " +
                           std::to_string(o.value));
  }
  auto before = lane.abdo.guard_violations();
  auto next = lane.abdo.on_response(ret);
  diag_.guard_violations += lane.abdo.guard_violations() - before;
  if (next) {
    trigger(o, *next, out, ids);
    return out;
  }
  Active done = *lane.active;
  lane.active.reset();
  AbdoNote note;
  note.id = done.id;
  note.invoke = false;
  note.kind = lane.abdo.kind();
  note.object = o;
  note.hl = done.hl;
  if (note.kind == AbdoKind::read) {
    note.ret = ret;
  } else {
    note.lp = LinPoint::cas;
  }
  out.notes.push_back(note);
  round_response(done.hl, done.phase,
                 note.kind == AbdoKind::read ? std::optional<TaggedValue>(ret) : std::nullopt, out,
                 ids);
  pump(o, out, ids);
  return out;
}

void CasAbdClient::round_response(OpId hl, Phase phase, const std::optional<TaggedValue>& observed,
                                  Effects& out, IdSource& ids) {
  // Late replies only refreshed exp; they never change a finished round.
  if (!current_ || current_->id != hl || current_->phase != phase || current_->completed) return;
  auto& cur = *current_;
  if (phase == Phase::collect && observed) {
    if (!cur.best || cur.best->ts < observed->ts) {
      cur.best = observed;
    } else if (cur.best->ts == observed->ts && cur.best->val != observed->val) {
      ++diag_.ts_ties;
    }
  }
  ++cur.responses;
  const auto quorum = static_cast<std::uint32_t>(lanes_.size()) - f_;
  if (cur.responses < quorum) return;

  if (phase == Phase::collect) {
    if (cur.kind == HlKind::write) {
      cur.chosen = TaggedValue{Timestamp{cur.best->ts.num + 1, self_}, cur.value};
    } else {
      cur.chosen = *cur.best;
    }
    cur.phase = Phase::update;
    cur.responses = 0;
    const TaggedValue chosen = cur.chosen;
    for (std::uint32_t i = 0; i < lanes_.size(); ++i) {
      enqueue(ObjectId{i}, Queued{AbdoKind::update, hl, Phase::update, chosen.ts, chosen.val},
              out, ids);
    }
    return;
  }
  cur.completed = true;
  out.completed = true;
  if (cur.kind == HlKind::read) out.result = cur.chosen.val;
}

void CasAbdClient::encode(StateKey& key) const {
  for (const auto& lane : lanes_) {
    lane.abdo.encode(key);
    // A lane has at most one CAS in flight, so the ids of the ABDO op and of
    // its CAS are implied by the lane and left out.
    key.put(lane.active.has_value());
    if (lane.active) {
      key.put(lane.active->hl);
      key.put(lane.active->phase);
    }
    key.put(lane.queue.size());
    for (const auto& q : lane.queue) {
      key.put(q.kind);
      key.put(q.hl);
      key.put(q.phase);
      key.put(q.t);
      key.put(q.v);
    }
  }
  key.put(diag_.guard_violations > 0);
  key.put(diag_.ts_ties > 0);
  key.put(current_.has_value());
  if (current_) {
    key.put(current_->id);
    key.put(current_->kind);
    key.put(current_->value);
    key.put(current_->phase);
    key.put(current_->responses);
    key.put(current_->best);
    key.put(current_->chosen);
    key.put(current_->completed);
  }
}

// ---------------------------------------------------------------------------
// Baseline

std::vector<ObjectId> BaselineLayout::slot(ClientId c) const {
  std::vector<ObjectId> out;
  for (std::uint32_t r = 0; r < slot_size(); ++r) out.push_back(ObjectId{c.value * slot_size() + r});
  return out;
}

Placement BaselineLayout::default_placement(std::uint32_t servers) const {
  std::map<ObjectId, ServerId> m;
  for (std::uint32_t c = 0; c < clients; ++c) {
    for (std::uint32_t r = 0; r < slot_size(); ++r) {
      m[ObjectId{c * slot_size() + r}] = ServerId{(c * slot_size() + r) % servers};
    }
  }
  return Placement(std::move(m));
}

void BaselineLayout::validate(const Placement& p) const {
  if (p.size() != object_count()) {
    throw std::invalid_argument("baseline needs k(2f+1) = " + std::to_string(object_count()) +
                                " registers, placement declares " + std::to_string(p.size()));
  }
  for (std::uint32_t c = 0; c < clients; ++c) {
    std::set<ServerId> servers;
    for (auto o : slot(ClientId{c})) servers.insert(p.server_of(o));
    if (servers.size() != slot_size()) {
      throw std::invalid_argument("slot of client " + std::to_string(c) +
                                  " does not span 2f+1 distinct servers");
    }
  }
}

BaselineClient::BaselineClient(ClientId self, BaselineLayout layout)
    : self_(self), layout_(layout), slot_replies_(layout.clients, 0) {}

void BaselineClient::encode(StateKey& key) const {
  key.put(op_);
  key.put(kind_);
  key.put(value_);
  key.put(phase_);
  key.put(round_ops_.size());
  for (auto id : round_ops_) key.put(id);
  for (auto r : slot_replies_) key.put(r);
  key.put(acks_);
  key.put(best_);
  key.put(completed_);
  key.put(diag_.guard_violations > 0);
  key.put(diag_.ts_ties > 0);
}

Effects BaselineClient::invoke(OpId hl, HlKind kind, const Value& v, IdSource& ids) {
  if (op_ && !completed_) throw std::logic_error("baseline client already has a pending op");
  Effects out;
  op_ = hl;
  kind_ = kind;
  value_ = v;
  phase_ = Phase::collect;
  completed_ = false;
  best_.reset();
  acks_ = 0;
  std::fill(slot_replies_.begin(), slot_replies_.end(), 0);
  round_ops_.clear();
  for (std::uint32_t i = 0; i < layout_.object_count(); ++i) {
    LlRequest req;
    req.id = ids.make();
    req.object = ObjectId{i};
    req.parent = hl;
    req.kind = LlKind::reg_read;
    round_ops_.push_back(req.id);
    out.triggers.push_back(req);
  }
  return out;
}

Effects BaselineClient::on_response(OpId ll, ObjectId o, const TaggedValue& ret, IdSource& ids) {
  Effects out;
  if (!op_ || completed_ || std::find(round_ops_.begin(), round_ops_.end(), ll) == round_ops_.end()) {
    return out;
  }
  const std::uint32_t need = layout_.f + 1;
  if (phase_ == Phase::collect) {
    if (!best_ || best_->ts < ret.ts) {
      best_ = ret;
    } else if (best_->ts == ret.ts && best_->val != ret.val) {
      ++diag_.ts_ties;
    }
    ++slot_replies_.at(layout_.owner(o).value);
    bool all = std::all_of(slot_replies_.begin(), slot_replies_.end(),
                           [&](std::uint32_t r) { return r >= need; });
    if (!all) return out;
    if (kind_ == HlKind::read) {
      completed_ = true;
      out.completed = true;
      out.result = best_->val;
      return out;
    }
    phase_ = Phase::store;
    round_ops_.clear();
    TaggedValue tv{Timestamp{best_->ts.num + 1, self_}, value_};
    for (auto obj : layout_.slot(self_)) {
      LlRequest req;
      req.id = ids.make();
      req.object = obj;
      req.parent = *op_;
      req.kind = LlKind::reg_write;
      req.desired = tv;
      round_ops_.push_back(req.id);
      out.triggers.push_back(req);
    }
    return out;
  }
  if (++acks_ >= need) {
    completed_ = true;
    out.completed = true;
  }
  return out;
}

}  // namespace regemu
