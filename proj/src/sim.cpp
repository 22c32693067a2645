#include "regemu/sim.hpp"

#include <algorithm>

#include "regemu/state_key.hpp"

namespace regemu {

std::string to_string(const Action& a) {
  switch (a.kind) {
    case ActionKind::invoke: return "invoke c" + std::to_string(a.target);
    case ActionKind::trigger: return "trigger c" + std::to_string(a.target);
    case ActionKind::ret: return "return c" + std::to_string(a.target);
    case ActionKind::apply: return "apply " + to_string(a.op);
    case ActionKind::respond: return "respond " + to_string(a.op);
    case ActionKind::crash_server: return "crash s" + std::to_string(a.target);
    case ActionKind::crash_client: return "crash c" + std::to_string(a.target);
  }
  return "?";
}

// ---------------------------------------------------------------------------
// World

World::World(const Scenario& sc, std::vector<WorkloadOp> workload, Recording rec)
    : scenario_(&sc),
      recording_(rec),
      storage_(sc.algorithm == Algorithm::cas_abd ? Storage::Kind::cas : Storage::Kind::registers, sc.n,
               sc.resolved_placement()),
      per_client_(sc.k) {
  for (const auto& op : workload) per_client_.at(op.client.value).push_back(op);
  const auto objects = static_cast<std::uint32_t>(storage_.object_count());
  for (std::uint32_t c = 0; c < sc.k; ++c) {
    ClientId id{c};
    Proto proto = sc.algorithm == Algorithm::cas_abd
                      ? Proto(CasAbdClient(id, objects, sc.f))
                      : Proto(BaselineClient(id, BaselineLayout{sc.k, sc.f}));
    clients_.push_back(ClientRuntime{std::move(proto), IdSource{id, 0}, {}, {}, HlKind::read, false, {}, 0, 0, false});
  }
  auto& h = history_.header;
  h.scenario = sc.name;
  h.algorithm = std::string(to_string(sc.algorithm));
  h.n = sc.n;
  h.f = sc.f;
  h.k = sc.k;
  h.seed = sc.seed;
  h.policy = std::string(to_string(sc.adversary.policy));
  h.placement = storage_.placement().mapping();
  h.faulty_set = sc.adversary.faulty_set;
  if (sc.algorithm == Algorithm::baseline_rw) h.reader = sc.designated_reader();
}

bool World::workload_left(ClientId c) const {
  return clients_.at(c.value).next_op < per_client_.at(c.value).size();
}

std::vector<Action> World::enabled() const {
  std::vector<Action> out;
  std::vector<Action> deferred_invokes;
  Step earliest = ~Step{0};
  for (std::uint32_t c = 0; c < clients_.size(); ++c) {
    const auto& cr = clients_[c];
    if (cr.crashed) continue;
    if (!cr.current && cr.next_op < per_client_[c].size()) {
      const Action inv{ActionKind::invoke, c, {}};
      if (step_ + 1 >= per_client_[c][cr.next_op].not_before) {
        out.push_back(inv);
      } else {
        const Step nb = per_client_[c][cr.next_op].not_before;
        if (nb < earliest) {
          earliest = nb;
          deferred_invokes.clear();
        }
        if (nb == earliest) deferred_invokes.push_back(inv);
      }
    }
    if (!cr.outbox.empty()) out.push_back(Action{ActionKind::trigger, c, {}});
    if (cr.current && cr.ready) out.push_back(Action{ActionKind::ret, c, {}});
  }
  for (const auto& [id, op] : ll_) {
    if (storage_.object_crashed(op.object)) continue;
    if (op.state == LlState::triggered) {
      out.push_back(Action{ActionKind::apply, storage_.placement().server_of(op.object).value, id});
    } else if (op.state == LlState::applied && !clients_.at(id.client.value).crashed) {
      out.push_back(Action{ActionKind::respond, id.client.value, id});
    }
  }
  // Nothing else can happen before the constrained invocations: time jumps
  // to the earliest of them.
  if (out.empty()) return deferred_invokes;
  return out;
}

void World::record(Event ev) {
  if (recording_ == Recording::high_level_only && ev.kind != EventKind::hl_invoke &&
      ev.kind != EventKind::hl_return) {
    return;
  }
  history_.events.push_back(std::move(ev));
}

void World::absorb(ClientRuntime& cr, Effects&& fx, Event& ev) {
  for (auto& req : fx.triggers) {
    LlOp op;
    op.id = req.id;
    op.parent = req.parent;
    op.object = req.object;
    op.kind = req.kind;
    op.expected = req.expected;
    op.desired = req.desired;
    op.abdo = req.abdo;
    ll_.emplace(op.id, op);
    cr.outbox.push_back(op.id);
  }
  for (auto& n : fx.notes) ev.abdo_notes.push_back(std::move(n));
  if (fx.completed) {
    cr.ready = true;
    cr.result = fx.result;
  }
}

void World::perform(const Action& a) {
  if (a.kind == ActionKind::invoke) {
    const auto& cr = clients_.at(a.target);
    const Step nb = per_client_.at(a.target).at(cr.next_op).not_before;
    if (nb > step_ + 1) step_ = nb - 1;
  }
  ++step_;
  history_.steps = step_;
  Event ev;
  ev.step = step_;
  switch (a.kind) {
    case ActionKind::invoke: {
      auto& cr = clients_.at(a.target);
      const auto& wop = per_client_.at(a.target).at(cr.next_op++);
      cr.current = cr.ids.make();
      cr.kind = wop.kind;
      cr.ready = false;
      cr.result.reset();
      Value v;
      if (wop.kind == HlKind::write) v = Value{wop.payload, ClientId{a.target}, ++cr.write_seq};
      ev.kind = EventKind::hl_invoke;
      ev.actor = Actor::of(ClientId{a.target});
      ev.op = *cr.current;
      ev.hl_kind = wop.kind;
      if (wop.kind == HlKind::write) ev.value = v;
      auto fx = std::visit([&](auto& p) { return p.invoke(*cr.current, wop.kind, v, cr.ids); }, cr.proto);
      absorb(cr, std::move(fx), ev);
      break;
    }
    case ActionKind::trigger: {
      auto& cr = clients_.at(a.target);
      OpId id = cr.outbox.front();
      cr.outbox.pop_front();
      auto& op = ll_.at(id);
      op.state = LlState::triggered;
      if (op.kind == LlKind::reg_write) storage_.reg(op.object).trigger_write(id, op.desired);
      ev.kind = EventKind::ll_trigger;
      ev.actor = Actor::of(ClientId{a.target});
      ev.op = id;
      ev.parent = op.parent;
      ev.object = op.object;
      ev.ll_kind = op.kind;
      ev.abdo = op.abdo;
      if (op.kind == LlKind::cas) ev.expected = op.expected;
      if (op.kind != LlKind::reg_read) ev.desired = op.desired;
      break;
    }
    case ActionKind::apply: {
      auto& op = ll_.at(a.op);
      TaggedValue prev = storage_.state(op.object);
      switch (op.kind) {
        case LlKind::cas: storage_.cas(op.object).apply(op.expected, op.desired); break;
        case LlKind::reg_write: storage_.reg(op.object).apply_write(op.id); break;
        case LlKind::reg_read: break;
      }
      const TaggedValue& after = storage_.state(op.object);
      if (op.kind == LlKind::cas && after.ts < prev.ts) ++monotonic_violations_;
      op.result = prev;
      op.state = LlState::applied;
      ev.kind = EventKind::ll_apply;
      ev.actor = Actor::of(storage_.placement().server_of(op.object));
      ev.op = op.id;
      ev.parent = op.parent;
      ev.object = op.object;
      ev.ll_kind = op.kind;
      ev.prev = prev;
      ev.after = after;
      break;
    }
    case ActionKind::respond: {
      auto it = ll_.find(a.op);
      LlOp op = it->second;
      ll_.erase(it);
      auto& cr = clients_.at(op.id.client.value);
      ev.kind = EventKind::ll_respond;
      ev.actor = Actor::of(op.id.client);
      ev.op = op.id;
      ev.parent = op.parent;
      ev.object = op.object;
      ev.ll_kind = op.kind;
      ev.prev = op.result;
      auto fx = std::visit([&](auto& p) { return p.on_response(op.id, op.object, op.result, cr.ids); },
                           cr.proto);
      absorb(cr, std::move(fx), ev);
      break;
    }
    case ActionKind::ret: {
      auto& cr = clients_.at(a.target);
      ev.kind = EventKind::hl_return;
      ev.actor = Actor::of(ClientId{a.target});
      ev.op = *cr.current;
      ev.hl_kind = cr.kind;
      if (cr.kind == HlKind::read) ev.value = cr.result;
      cr.current.reset();
      cr.ready = false;
      cr.result.reset();
      break;
    }
    case ActionKind::crash_server: {
      storage_.crash_server(ServerId{a.target});
      ev.kind = EventKind::server_crash;
      ev.actor = Actor::of(ServerId{a.target});
      ev.server = ServerId{a.target};
      break;
    }
    case ActionKind::crash_client: {
      auto& cr = clients_.at(a.target);
      if (cr.crashed) throw std::invalid_argument("client " + std::to_string(a.target) + " already crashed");
      cr.crashed = true;
      ev.kind = EventKind::client_crash;
      ev.actor = Actor::of(ClientId{a.target});
      break;
    }
  }
  record(std::move(ev));
}

bool World::has_pending_high_level() const {
  for (std::uint32_t c = 0; c < clients_.size(); ++c) {
    const auto& cr = clients_[c];
    if (cr.crashed) continue;
    if (cr.current || cr.next_op < per_client_[c].size()) return true;
  }
  return false;
}

std::vector<OpId> World::pending_high_level() const {
  std::vector<OpId> out;
  for (const auto& cr : clients_) {
    if (cr.current) out.push_back(*cr.current);
  }
  return out;
}

WorldDiagnostics World::diagnostics() const {
  WorldDiagnostics d;
  d.monotonic_violations = monotonic_violations_;
  for (const auto& cr : clients_) {
    const auto& pd = std::visit([](const auto& p) -> const ProtocolDiagnostics& { return p.diagnostics(); },
                                cr.proto);
    d.guard_violations += pd.guard_violations;
    d.ts_ties += pd.ts_ties;
  }
  return d;
}

std::set<ObjectId> World::covered() const {
  std::set<ObjectId> out;
  if (storage_.kind() != Storage::Kind::registers) return out;
  for (std::uint32_t i = 0; i < storage_.object_count(); ++i) {
    const auto& obj = std::get<RegisterObject>(storage_.object(ObjectId{i}));
    if (obj.covered()) out.insert(obj.id);
  }
  return out;
}

StateDigest World::state_key() const {
  StateKey key;
  for (std::uint32_t s = 0; s < storage_.server_count(); ++s) key.put(storage_.server_crashed(ServerId{s}));
  for (std::uint32_t i = 0; i < storage_.object_count(); ++i) {
    std::visit(
        [&](const auto& obj) {
          key.put(obj.state);
          if constexpr (std::is_same_v<std::decay_t<decltype(obj)>, RegisterObject>) {
            key.put(obj.pending_writes.size());
            for (const auto& [id, tv] : obj.pending_writes) {
              key.put(id);
              key.put(tv);
            }
          }
        },
        storage_.object(ObjectId{i}));
  }
  // Low-level ops are described by content rather than id: interleavings
  // that differ only in the order ids were handed out reach the same key.
  std::vector<StateDigest> ll_keys;
  ll_keys.reserve(ll_.size());
  for (const auto& [id, op] : ll_) {
    StateKey k;
    k.put(id.client.value);
    // baseline clients track round membership by id
    if (storage_.kind() == Storage::Kind::registers) k.put(id);
    k.put(op.parent);
    k.put(op.object.value);
    k.put(op.kind);
    k.put(op.expected);
    k.put(op.desired);
    k.put(op.state);
    k.put(op.result);
    ll_keys.push_back(k.digest());
  }
  std::sort(ll_keys.begin(), ll_keys.end());
  key.put(ll_keys.size());
  for (const auto& k : ll_keys) key.put(k);
  for (const auto& cr : clients_) {
    std::visit([&](const auto& p) { p.encode(key); }, cr.proto);
    key.put(cr.ids.next);
    key.put(cr.outbox.size());
    for (auto id : cr.outbox) {
      key.put(ll_.at(id).object.value);
      key.put(ll_.at(id).kind);
    }
    key.put(cr.current.has_value());
    if (cr.current) key.put(*cr.current);
    key.put(static_cast<std::uint64_t>(cr.kind));
    key.put(cr.ready);
    key.put(cr.result.has_value());
    if (cr.result) key.put(*cr.result);
    key.put(cr.next_op);
    key.put(cr.write_seq);
    key.put(cr.crashed);
  }
  for (const auto& e : history_.events) {
    if (e.kind != EventKind::hl_invoke && e.kind != EventKind::hl_return) continue;
    key.put(static_cast<std::uint64_t>(e.kind));
    key.put(e.op);
    key.put(e.value.has_value());
    if (e.value) key.put(*e.value);
  }
  key.put(monotonic_violations_);
  return key.digest();
}

// ---------------------------------------------------------------------------
// Policies

RandomPolicy::RandomPolicy(std::uint64_t seed, std::uint64_t d_max, bool fair, ActionWeights weights,
                           std::vector<CrashSpec> crashes)
    : rng_(seed ^ 0xa5a5a5a5deadbeefull), d_max_(d_max), fair_(fair), weights_(weights), crashes_(std::move(crashes)) {
  std::stable_sort(crashes_.begin(), crashes_.end(),
                   [](const CrashSpec& a, const CrashSpec& b) { return a.step < b.step; });
}

std::optional<Action> RandomPolicy::scheduled_crash(const World& w) {
  if (next_crash_ >= crashes_.size() || crashes_[next_crash_].step > w.step() + 1) return std::nullopt;
  const auto& c = crashes_[next_crash_++];
  if (c.server) return Action{ActionKind::crash_server, c.server->value, {}};
  return Action{ActionKind::crash_client, c.client->value, {}};
}

std::optional<Action> RandomPolicy::choose(const World& w, const std::vector<Action>& enabled) {
  if (!enabled.empty()) {
    if (auto c = scheduled_crash(w)) return c;
  }
  return pick(w, enabled);
}

std::optional<Action> RandomPolicy::pick(const World& w, const std::vector<Action>& candidates) {
  if (candidates.empty()) return std::nullopt;
  const Step now = w.step();
  std::map<Action, Step> since;
  for (const auto& a : candidates) {
    auto it = waiting_since_.find(a);
    since[a] = it == waiting_since_.end() ? now : it->second;
  }
  waiting_since_ = std::move(since);

  auto take = [&](const Action& a) {
    waiting_since_.erase(a);
    return a;
  };
  if (fair_) {
    std::optional<Action> overdue;
    Step oldest = now;
    for (const auto& a : candidates) {
      Step s = waiting_since_.at(a);
      if (now - s >= d_max_ && (!overdue || s < oldest)) {
        overdue = a;
        oldest = s;
      }
    }
    if (overdue) return take(*overdue);
  }
  auto weight = [&](const Action& a) -> std::uint64_t {
    switch (a.kind) {
      case ActionKind::apply: return weights_.apply;
      case ActionKind::respond: return weights_.respond;
      default: return weights_.client;
    }
  };
  std::uint64_t total = 0;
  for (const auto& a : candidates) total += weight(a);
  if (total == 0) return take(candidates[rng_() % candidates.size()]);
  std::uint64_t r = rng_() % total;
  for (const auto& a : candidates) {
    auto wgt = weight(a);
    if (r < wgt) return take(a);
    r -= wgt;
  }
  return take(candidates.back());
}

SyncPolicy::SyncPolicy(std::vector<CrashSpec> crashes)
    : RandomPolicy(0, 0, true, ActionWeights{}, std::move(crashes)) {}

std::optional<Action> SyncPolicy::choose(const World& w, const std::vector<Action>& enabled) {
  if (!enabled.empty()) {
    if (auto c = scheduled_crash(w)) return c;
  }
  // d_max = 0 makes every candidate overdue; pick() then serves the oldest.
  return pick(w, enabled);
}

AdiPolicy::AdiPolicy(std::uint64_t seed, std::set<ServerId> faulty, std::uint32_t f, std::uint64_t d_max)
    : chooser_(seed, d_max, true, ActionWeights{}), f_(f) {
  state_.faulty = std::move(faulty);
}

bool AdiPolicy::prevented(const World& w, const LlOp& op) const {
  if (op.kind != LlKind::reg_write || op.state != LlState::triggered) return false;
  if (state_.completed.count(op.id.client)) return true;
  return state_.q.count(w.storage().placement().server_of(op.object)) > 0;
}

void AdiPolicy::refresh_q(const World& w) {
  auto cov = w.covered();
  state_.cov_new.clear();
  std::set_difference(cov.begin(), cov.end(), state_.cov_before.begin(), state_.cov_before.end(),
                      std::inserter(state_.cov_new, state_.cov_new.end()));
  std::set<ServerId> cand;
  for (auto s : w.storage().placement().image(state_.cov_new)) {
    if (!state_.faulty.count(s)) cand.insert(s);
  }
  if (cand.size() <= f_) {
    if (!std::includes(cand.begin(), cand.end(), state_.q.begin(), state_.q.end())) ++q_violations_;
    state_.q = std::move(cand);
  }
}

std::optional<Action> AdiPolicy::choose(const World& w, const std::vector<Action>& enabled) {
  if (phase_ == Phase::idle) {
    while (next_writer_ < w.clients() && !w.workload_left(ClientId{next_writer_})) ++next_writer_;
    if (next_writer_ >= w.clients()) return std::nullopt;
    Action inv{ActionKind::invoke, next_writer_, {}};
    if (std::find(enabled.begin(), enabled.end(), inv) == enabled.end()) return std::nullopt;
    return inv;
  }
  std::vector<Action> allowed;
  for (const auto& a : enabled) {
    if (a.kind == ActionKind::invoke) continue;
    if (a.kind == ActionKind::apply && prevented(w, w.ll_ops().at(a.op))) continue;
    allowed.push_back(a);
  }
  if (phase_ == Phase::release && allowed.empty()) {
    EpochRecord rec;
    rec.epoch = state_.epoch;
    rec.end_step = w.step();
    rec.return_step = return_step_;
    rec.cov = w.covered();
    rec.cov_size = rec.cov.size();
    for (auto s : w.storage().placement().image(rec.cov)) {
      if (state_.faulty.count(s)) rec.cov_servers_in_f.insert(s);
    }
    rec.q_size = state_.q.size();
    rec.fresh_servers = fresh_at_return_;
    rec.point_contention = epoch_contention_;
    epochs_.push_back(rec);
    phase_ = Phase::idle;
    ++next_writer_;
    return choose(w, enabled);
  }
  return chooser_.pick(w, allowed);
}

void AdiPolicy::observe(const World& w, const Action& done) {
  if (done.kind == ActionKind::invoke) {
    phase_ = Phase::epoch;
    writer_ = ClientId{done.target};
    ++state_.epoch;
    state_.epoch_start = w.step() - 1;
    state_.cov_before = w.covered();
    state_.triggered.clear();
    state_.cov_new.clear();
    state_.q.clear();
    epoch_contention_ = 0;
  }
  if (done.kind == ActionKind::trigger && !w.history().events.empty()) {
    const auto& ev = w.history().events.back();
    if (ev.ll_kind == LlKind::reg_write && ev.object) state_.triggered.insert(*ev.object);
  }
  if (phase_ != Phase::idle) {
    refresh_q(w);
    std::uint32_t busy = 0;
    for (std::uint32_t c = 0; c < w.clients(); ++c) busy += w.client_busy(ClientId{c}) ? 1 : 0;
    epoch_contention_ = std::max(epoch_contention_, busy);
  }
  if (done.kind == ActionKind::ret && writer_ && done.target == writer_->value && phase_ == Phase::epoch) {
    phase_ = Phase::release;
    return_step_ = w.step();
    std::set<ObjectId> fresh;
    std::set_difference(state_.triggered.begin(), state_.triggered.end(), state_.cov_before.begin(),
                        state_.cov_before.end(), std::inserter(fresh, fresh.end()));
    fresh_at_return_ = w.storage().placement().image(fresh).size();
    // C(t_i) for the next epoch.
    state_.completed.insert(*writer_);
  }
}

std::unique_ptr<Policy> make_policy(const Scenario& sc, std::uint64_t seed) {
  const auto& adv = sc.adversary;
  switch (adv.policy) {
    case PolicyKind::random:
    case PolicyKind::crash:
      return std::make_unique<RandomPolicy>(seed, sc.fairness_bound(), adv.fair, adv.weights, adv.crashes);
    case PolicyKind::sync:
      return std::make_unique<SyncPolicy>(adv.crashes);
    case PolicyKind::adi:
      return std::make_unique<AdiPolicy>(seed, std::set<ServerId>(adv.faulty_set.begin(), adv.faulty_set.end()),
                                         sc.f, sc.fairness_bound());
  }
  throw ConfigError("adversary.policy", "unsupported policy");
}

RunResult run(const Scenario& sc, std::optional<std::uint64_t> seed) {
  sc.validate();
  const std::uint64_t s = seed.value_or(sc.seed);
  World w(sc, sc.resolved_workload(s));
  w.history().header.seed = s;
  auto policy = make_policy(sc, s);
  bool budget_hit = false;
  while (true) {
    auto en = w.enabled();
    if (w.step() >= sc.step_budget) {
      budget_hit = !en.empty() || w.has_pending_high_level();
      break;
    }
    auto a = policy->choose(w, en);
    if (!a) break;
    w.perform(*a);
    policy->observe(w, *a);
  }
  RunResult out;
  out.diagnostics = w.diagnostics();
  out.pending = w.pending_high_level();
  if (auto* adi = dynamic_cast<AdiPolicy*>(policy.get())) {
    out.epochs = adi->epochs();
    out.q_monotonicity_violations = adi->q_monotonicity_violations();
  }
  out.history = std::move(w.history());
  out.history.steps = w.step();
  if (budget_hit) {
    out.history.truncated = true;
    out.history.truncation_reason = "budget";
  } else if (w.has_pending_high_level()) {
    out.history.truncated = true;
    out.history.truncation_reason = "stalled";
  }
  return out;
}

std::set<ObjectId> measure_cov(const History& h, Step t) {
  std::map<ObjectId, std::set<OpId>> pending;
  std::set<ObjectId> crashed;
  for (const auto& e : h.events) {
    if (e.step > t) break;
    switch (e.kind) {
      case EventKind::ll_trigger:
        if (e.ll_kind == LlKind::reg_write && e.object && !crashed.count(*e.object)) pending[*e.object].insert(e.op);
        break;
      case EventKind::ll_apply:
        if (e.ll_kind == LlKind::reg_write && e.object) pending[*e.object].erase(e.op);
        break;
      case EventKind::server_crash:
        for (const auto& [o, s] : h.header.placement) {
          if (e.server && s == *e.server) {
            crashed.insert(o);
            pending.erase(o);
          }
        }
        break;
      default:
        break;
    }
  }
  std::set<ObjectId> out;
  for (const auto& [o, ops] : pending) {
    if (!ops.empty()) out.insert(o);
  }
  return out;
}

}  // namespace regemu
