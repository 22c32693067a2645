#include "regemu/verify.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "regemu/protocol.hpp"

namespace regemu {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inapplicable: return "inapplicable";
    case Verdict::partial: return "partial";
  }
  return "?";
}

namespace {

std::string show(const Value& v) {
  if (v.is_initial()) return "v0";
  return std::to_string(v.payload) + "@c" + std::to_string(v.writer->value) + "#" + std::to_string(v.seq);
}

std::string show(const Timestamp& t) { return "(" + std::to_string(t.num) + ",c" + std::to_string(t.c.value) + ")"; }

std::string show(const TaggedValue& tv) { return show(tv.ts) + ":" + show(tv.val); }

constexpr Step kNever = ~Step{0};

Step ret_or_never(const HlOp& op) { return op.ret.value_or(kNever); }

// a precedes b in real time
bool before(const HlOp& a, const HlOp& b) { return a.ret && *a.ret < b.invoke; }

bool overlap(const HlOp& a, const HlOp& b) { return !before(a, b) && !before(b, a); }

}  // namespace

HlHistory project(const History& h) {
  HlHistory out;
  std::map<OpId, std::size_t> index;
  for (const auto& e : h.events) {
    if (e.kind == EventKind::hl_invoke) {
      HlOp op;
      op.id = e.op;
      op.kind = e.hl_kind.value_or(HlKind::read);
      if (op.kind == HlKind::write) op.value = e.value;
      op.invoke = e.step;
      index[e.op] = out.ops.size();
      out.ops.push_back(op);
    } else if (e.kind == EventKind::hl_return) {
      auto it = index.find(e.op);
      if (it == index.end()) continue;
      auto& op = out.ops[it->second];
      op.ret = e.step;
      if (op.kind == HlKind::read) op.value = e.value.value_or(kInitialValue);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linearizability

namespace {

struct PairHash {
  std::size_t operator()(const std::pair<std::uint64_t, std::uint32_t>& p) const {
    return std::hash<std::uint64_t>()(p.first * 0x9e3779b97f4a7c15ull ^ p.second);
  }
};

// Looks for one of the classic small violation patterns to report instead of
// the whole history.
LinResult explain_failure(const std::vector<HlOp>& ops, const std::vector<int>& read_src) {
  LinResult r;
  r.verdict = Verdict::fail;
  auto src_op = [&](std::size_t i) -> const HlOp* {
    return read_src[i] < 0 ? nullptr : &ops[static_cast<std::size_t>(read_src[i])];
  };
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const auto& rd = ops[i];
    if (rd.kind != HlKind::read || !rd.complete()) continue;
    const HlOp* w = src_op(i);
    if (w && before(rd, *w)) {
      r.witness = "read " + to_string(rd.id) + " returned " + show(*rd.value) + " before write " +
                  to_string(w->id) + " was invoked";
      r.witness_ops = {rd.id, w->id};
      return r;
    }
    for (const auto& w2 : ops) {
      if (w2.kind != HlKind::write || &w2 == w) continue;
      const bool w2_after_src = w == nullptr || before(*w, w2);
      if (w2_after_src && before(w2, rd)) {
        r.witness = "stale read: " + to_string(rd.id) + " returned " + show(*rd.value) + " after write " +
                    to_string(w2.id) + " completed";
        r.witness_ops = {rd.id, w2.id};
        return r;
      }
    }
  }
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const auto& r1 = ops[i];
    if (r1.kind != HlKind::read || !r1.complete()) continue;
    for (std::size_t j = 0; j < ops.size(); ++j) {
      const auto& r2 = ops[j];
      if (r2.kind != HlKind::read || !r2.complete() || !before(r1, r2)) continue;
      const HlOp* w1 = src_op(i);
      const HlOp* w2 = src_op(j);
      const bool inverted = w1 && ((w2 == nullptr) || before(*w2, *w1));
      if (inverted) {
        r.witness = "new/old inversion: " + to_string(r1.id) + " returned " + show(*r1.value) + ", later " +
                    to_string(r2.id) + " returned older " + show(*r2.value);
        r.witness_ops = {r1.id, r2.id};
        return r;
      }
    }
  }
  r.witness = "no precedence-respecting order matches every read";
  for (const auto& op : ops) r.witness_ops.push_back(op.id);
  return r;
}

}  // namespace

LinResult check_linearizable(const HlHistory& h) {
  LinResult result;
  std::vector<HlOp> ops;
  for (const auto& op : h.ops) {
    if (op.kind == HlKind::read && !op.complete()) continue;
    ops.push_back(op);
  }
  if (ops.size() > 64) {
    result.verdict = Verdict::inapplicable;
    result.witness = "history has " + std::to_string(ops.size()) + " operations; the search handles at most 64";
    return result;
  }
  const std::size_t n = ops.size();

  // value id: 0 is v0, i+1 is the write at index i
  std::vector<std::pair<Value, std::size_t>> written;
  for (std::size_t i = 0; i < n; ++i) {
    if (ops[i].kind != HlKind::write) continue;
    const Value& v = ops[i].value.value_or(kInitialValue);
    for (const auto& [other, j] : written) {
      if (other == v) {
        result.verdict = Verdict::inapplicable;
        result.witness = "writes " + to_string(ops[j].id) + " and " + to_string(ops[i].id) + " share value " + show(v);
        return result;
      }
    }
    if (v.is_initial()) {
      result.verdict = Verdict::inapplicable;
      result.witness = "write " + to_string(ops[i].id) + " writes the initial value";
      return result;
    }
    written.emplace_back(v, i);
  }
  std::vector<int> read_src(n, -1);
  std::vector<std::uint32_t> value_id(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (ops[i].kind == HlKind::write) {
      value_id[i] = static_cast<std::uint32_t>(i + 1);
      continue;
    }
    const Value& v = *ops[i].value;
    if (v.is_initial()) continue;
    auto it = std::find_if(written.begin(), written.end(), [&](const auto& p) { return p.first == v; });
    if (it == written.end()) {
      result.verdict = Verdict::fail;
      result.witness = "read " + to_string(ops[i].id) + " returned " + show(v) + ", which was never written";
      result.witness_ops = {ops[i].id};
      return result;
    }
    read_src[i] = static_cast<int>(it->second);
    value_id[i] = static_cast<std::uint32_t>(it->second + 1);
  }

  std::vector<std::uint64_t> pred(n, 0);
  std::uint64_t required = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ops[i].complete()) required |= std::uint64_t{1} << i;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && before(ops[j], ops[i])) pred[i] |= std::uint64_t{1} << j;
    }
  }

  std::unordered_set<std::pair<std::uint64_t, std::uint32_t>, PairHash> dead;
  std::vector<std::size_t> order;
  std::function<bool(std::uint64_t, std::uint32_t)> search = [&](std::uint64_t done, std::uint32_t cur) {
    if ((done & required) == required) return true;
    if (dead.count({done, cur})) return false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t bit = std::uint64_t{1} << i;
      if (done & bit) continue;
      if (pred[i] & ~done) continue;
      std::uint32_t next = cur;
      if (ops[i].kind == HlKind::read) {
        if (value_id[i] != cur) continue;
      } else {
        next = value_id[i];
      }
      order.push_back(i);
      if (search(done | bit, next)) return true;
      order.pop_back();
    }
    dead.insert({done, cur});
    return false;
  };
  if (search(0, 0)) {
    for (auto i : order) result.linearization.push_back(ops[i].id);
    return result;
  }
  return explain_failure(ops, read_src);
}

LinResult check_sw_safety(const HlHistory& h) {
  LinResult result;
  std::vector<const HlOp*> writes;
  for (const auto& op : h.ops) {
    if (op.kind == HlKind::write) writes.push_back(&op);
  }
  std::sort(writes.begin(), writes.end(), [](const HlOp* a, const HlOp* b) { return a->invoke < b->invoke; });
  for (std::size_t i = 1; i < writes.size(); ++i) {
    if (!before(*writes[i - 1], *writes[i])) {
      result.verdict = Verdict::inapplicable;
      result.witness = "writes " + to_string(writes[i - 1]->id) + " and " + to_string(writes[i]->id) + " overlap";
      result.witness_ops = {writes[i - 1]->id, writes[i]->id};
      return result;
    }
  }
  for (const auto& rd : h.ops) {
    if (rd.kind != HlKind::read || !rd.complete()) continue;
    const HlOp* last = nullptr;
    bool overlapping = false;
    for (const HlOp* w : writes) {
      if (overlap(*w, rd)) {
        overlapping = true;
        break;
      }
      if (before(*w, rd)) last = w;
    }
    if (overlapping) continue;
    const Value expected = last ? *last->value : kInitialValue;
    if (*rd.value != expected) {
      result.verdict = Verdict::fail;
      result.witness = "read " + to_string(rd.id) + " overlaps no write but returned " + show(*rd.value) +
                       " instead of " + show(expected);
      result.witness_ops = {rd.id};
      if (last) result.witness_ops.push_back(last->id);
      return result;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// ABDO linearization points

namespace {

struct AbdoInfo {
  AbdoKind kind = AbdoKind::read;
  ObjectId object;
  OpId hl;
  Timestamp t;
  Value v;
  Step invoke_step = 0;
  bool returned = false;
  std::optional<TaggedValue> ret;
  std::optional<LinPoint> lp;
  std::pair<Step, std::uint32_t> return_at{0, 0};
};

struct CasTrigger {
  OpId abdo;
  TaggedValue expected;
  TaggedValue desired;
};

struct CasApply {
  Step step = 0;
  OpId ll;
  OpId abdo;
  ObjectId object;
  TaggedValue prev;
  TaggedValue after;
};

struct AbdoTrace {
  std::map<OpId, AbdoInfo> abdo;
  std::map<OpId, CasTrigger> triggers;
  std::vector<CasApply> applies;
  std::map<OpId, std::vector<std::size_t>> applies_of;  // abdo -> indices into applies
};

AbdoTrace collect_abdo(const History& h) {
  AbdoTrace tr;
  for (const auto& e : h.events) {
    std::uint32_t order = 0;
    for (const auto& n : e.abdo_notes) {
      if (n.invoke) {
        auto& info = tr.abdo[n.id];
        info.kind = n.kind;
        info.object = n.object;
        info.hl = n.hl;
        if (n.ts) info.t = *n.ts;
        if (n.val) info.v = *n.val;
        info.invoke_step = e.step;
      } else {
        auto& info = tr.abdo[n.id];
        info.returned = true;
        info.ret = n.ret;
        info.lp = n.lp;
        info.return_at = {e.step, order};
      }
      ++order;
    }
    if (e.ll_kind != LlKind::cas || !e.object) continue;
    if (e.kind == EventKind::ll_trigger && e.abdo) {
      tr.triggers[e.op] = CasTrigger{*e.abdo, e.expected.value_or(kInitialTagged), e.desired.value_or(kInitialTagged)};
    } else if (e.kind == EventKind::ll_apply) {
      auto it = tr.triggers.find(e.op);
      if (it == tr.triggers.end()) continue;
      CasApply a{e.step, e.op, it->second.abdo, *e.object, e.prev.value_or(kInitialTagged),
                 e.after.value_or(kInitialTagged)};
      tr.applies_of[a.abdo].push_back(tr.applies.size());
      tr.applies.push_back(a);
    }
  }
  return tr;
}

}  // namespace

LinpointResult check_abdo_linpoints(const History& h) {
  LinpointResult res;
  if (h.header.algorithm != "cas-abd") {
    res.verdict = Verdict::inapplicable;
    res.witness = "history is not from cas-abd";
    return res;
  }
  const AbdoTrace tr = collect_abdo(h);

  // point of each ABDO op: an apply index or a guard position
  std::map<std::size_t, OpId> apply_point;
  struct Guard {
    std::pair<Step, std::uint32_t> at;
    OpId abdo;
  };
  std::map<ObjectId, std::vector<Guard>> guards;
  for (const auto& [id, info] : tr.abdo) {
    auto ai = tr.applies_of.find(id);
    const bool has_apply = ai != tr.applies_of.end() && !ai->second.empty();
    if (info.kind == AbdoKind::read) {
      if (!has_apply) {
        ++res.excluded;
        continue;
      }
      apply_point[ai->second.front()] = id;
      continue;
    }
    if (info.returned && info.lp == LinPoint::guard) {
      guards[info.object].push_back(Guard{info.return_at, id});
      continue;
    }
    if (info.returned && has_apply) {
      apply_point[ai->second.back()] = id;
      continue;
    }
    // unreturned update: a state-changing CAS would have ended its loop
    std::optional<std::size_t> changing;
    if (has_apply) {
      for (auto idx : ai->second) {
        if (tr.applies[idx].after != tr.applies[idx].prev) changing = idx;
      }
    }
    if (changing) {
      apply_point[*changing] = id;
    } else {
      ++res.excluded;
    }
  }

  struct Item {
    std::pair<Step, std::uint32_t> at;
    std::optional<std::size_t> apply;
    OpId abdo;
  };
  std::map<ObjectId, std::vector<Item>> timeline;
  for (std::size_t i = 0; i < tr.applies.size(); ++i) {
    timeline[tr.applies[i].object].push_back(Item{{tr.applies[i].step, 0}, i, tr.applies[i].abdo});
  }
  for (const auto& [obj, gs] : guards) {
    for (const auto& g : gs) timeline[obj].push_back(Item{g.at, std::nullopt, g.abdo});
  }
  auto fail = [&](const std::string& why) {
    if (res.witness.empty()) res.witness = why;
    res.verdict = Verdict::fail;
  };
  for (auto& [obj, items] : timeline) {
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.at < b.at; });
    AbdoOracle oracle;
    for (const auto& it : items) {
      const AbdoInfo& info = tr.abdo.at(it.abdo);
      if (!it.apply) {
        ++res.replayed;
        const auto before_state = oracle.state();
        oracle.update(info.t, info.v);
        if (oracle.state() != before_state) {
          ++res.state_mismatches;
          fail("guard-skipped update " + to_string(it.abdo) + " on object " + std::to_string(obj.value) +
               " would have installed " + show(info.t));
        }
        continue;
      }
      const CasApply& a = tr.applies[*it.apply];
      if (info.kind == AbdoKind::read && a.after != a.prev) {
        ++res.read_obstructions;
        fail("read CAS " + to_string(a.ll) + " changed object " + std::to_string(obj.value));
      }
      if (a.prev != oracle.state()) {
        ++res.state_mismatches;
        fail("apply " + to_string(a.ll) + " at step " + std::to_string(a.step) + " saw " + show(a.prev) +
             " but the sequential object holds " + show(oracle.state()));
      }
      auto pt = apply_point.find(*it.apply);
      if (pt != apply_point.end()) {
        ++res.replayed;
        if (info.kind == AbdoKind::read) {
          const TaggedValue expect = oracle.read();
          if (info.ret && *info.ret != expect) {
            ++res.return_mismatches;
            fail("read " + to_string(it.abdo) + " returned " + show(*info.ret) + ", sequential replay gives " +
                 show(expect));
          }
        } else {
          oracle.update(info.t, info.v);
        }
      }
      if (a.after != oracle.state()) {
        ++res.state_mismatches;
        fail("apply " + to_string(a.ll) + " at step " + std::to_string(a.step) + " left " + show(a.after) +
             " but the sequential object holds " + show(oracle.state()));
      }
    }
  }
  return res;
}

TsUniquenessResult check_ts_uniqueness(const History& h) {
  TsUniquenessResult res;
  std::map<std::pair<ObjectId, Timestamp>, std::vector<Value>> groups;
  for (const auto& e : h.events) {
    for (const auto& n : e.abdo_notes) {
      if (n.invoke && n.kind == AbdoKind::update && n.ts) groups[{n.object, *n.ts}].push_back(n.val.value_or(kInitialValue));
    }
    if (e.kind == EventKind::ll_trigger && e.ll_kind == LlKind::reg_write && e.object && e.desired) {
      groups[{*e.object, e.desired->ts}].push_back(e.desired->val);
    }
  }
  res.groups = groups.size();
  for (const auto& [key, vals] : groups) {
    res.max_multiplicity = std::max<std::uint64_t>(res.max_multiplicity, vals.size());
    for (const auto& v : vals) {
      if (v != vals.front()) {
        ++res.conflicting;
        if (res.witness.empty()) {
          res.witness = "object " + std::to_string(key.first.value) + " received timestamp " + show(key.second) +
                        " with values " + show(vals.front()) + " and " + show(v);
        }
        break;
      }
    }
  }
  if (res.conflicting) res.verdict = Verdict::fail;
  return res;
}

// ---------------------------------------------------------------------------
// Appendix bounds

std::uint64_t obstruction_bound(std::uint32_t c) {
  const std::uint64_t x = c;
  return x * x + 3 * x + 2;
}

std::uint32_t BoundsReport::max_failed() const {
  std::uint32_t m = 0;
  for (const auto& ob : per_object) m = std::max(m, ob.failed);
  return m;
}

bool BoundsReport::ok() const {
  return obstruction_violations == 0 && tsgap_violations == 0 && early_obstructor_violations == 0 &&
         repeat_obstructor_violations == 0 && same_num_violations == 0 && guard_violations == 0 &&
         monotonic_violations == 0;
}

BoundsReport check_bounds(const History& h) {
  BoundsReport rep;
  const HlHistory hl = project(h);
  const AbdoTrace tr = collect_abdo(h);
  std::map<OpId, std::size_t> op_index;
  for (const auto& op : hl.ops) {
    OpBound b;
    b.op = op.id;
    b.kind = op.kind;
    b.complete = op.complete();
    b.pnt_cont = point_contention(h, op.id);
    op_index[op.id] = rep.ops.size();
    rep.ops.push_back(b);
  }
  auto note = [&](const std::string& why) {
    if (rep.witness.empty()) rep.witness = why;
  };

  // timestamps and update-phase start per high-level op
  std::map<std::pair<OpId, ObjectId>, OpId> update_of;
  for (const auto& [id, info] : tr.abdo) {
    if (info.kind != AbdoKind::update) continue;
    auto it = op_index.find(info.hl);
    if (it == op_index.end()) continue;
    auto& b = rep.ops[it->second];
    b.ts = info.t;
    if (!b.update_start || info.invoke_step < *b.update_start) b.update_start = info.invoke_step;
    update_of[{info.hl, info.object}] = id;
  }
  for (auto& b : rep.ops) b.rounds = (b.update_start ? 1u : 0u) + (b.complete && b.update_start ? 1u : 0u);

  // installer of every state an object held
  auto tv_less = [](const TaggedValue& a, const TaggedValue& b) {
    if (a.ts != b.ts) return a.ts < b.ts;
    if (a.val.payload != b.val.payload) return a.val.payload < b.val.payload;
    if (a.val.writer != b.val.writer) return a.val.writer < b.val.writer;
    return a.val.seq < b.val.seq;
  };
  struct Key {
    ObjectId o;
    TaggedValue tv;
  };
  auto key_less = [&](const Key& a, const Key& b) {
    if (a.o != b.o) return a.o < b.o;
    return tv_less(a.tv, b.tv);
  };
  std::map<Key, OpId, decltype(key_less)> installed(key_less);

  std::map<OpId, ObjectBound> per_abdo;
  for (const auto& [abdo_id, info] : tr.abdo) {
    if (info.kind != AbdoKind::update) continue;
    ObjectBound ob;
    ob.op = info.hl;
    ob.object = info.object;
    ob.update_invoke = info.invoke_step;
    auto it = op_index.find(info.hl);
    ob.bound = obstruction_bound(it == op_index.end() ? 0 : rep.ops[it->second].pnt_cont);
    per_abdo[abdo_id] = ob;
  }
  for (const auto& [ll, trig] : tr.triggers) {
    auto ai = tr.abdo.find(trig.abdo);
    if (ai == tr.abdo.end() || ai->second.kind != AbdoKind::update) continue;
    if (!(trig.desired.ts > trig.expected.ts)) {
      ++rep.guard_violations;
      note("CAS " + to_string(ll) + " issued with t " + show(trig.desired.ts) + " <= exp.ts " + show(trig.expected.ts));
    }
  }
  for (const auto& a : tr.applies) {
    if (a.after.ts < a.prev.ts) {
      ++rep.monotonic_violations;
      note("apply " + to_string(a.ll) + " lowered the timestamp of object " + std::to_string(a.object.value));
    }
    const auto& trig = tr.triggers.at(a.ll);
    const AbdoInfo& info = tr.abdo.at(a.abdo);
    if (info.kind == AbdoKind::update) {
      auto& ob = per_abdo[a.abdo];
      ++ob.cas_issued;
      if (a.prev != trig.expected) {
        ++ob.failed;
        auto inst = installed.find(Key{a.object, a.prev});
        if (inst != installed.end()) ob.obstructors.push_back(inst->second);
      }
    }
    if (a.after != a.prev) installed[Key{a.object, a.after}] = info.hl;
  }

  for (auto& [abdo_id, ob] : per_abdo) {
    auto it = op_index.find(ob.op);
    if (it != op_index.end()) {
      auto& b = rep.ops[it->second];
      b.max_failed = std::max(b.max_failed, ob.failed);
      b.total_failed += ob.failed;
      b.total_cas += ob.cas_issued;
    }
    if (ob.failed > ob.bound) {
      ++rep.obstruction_violations;
      note("op " + to_string(ob.op) + " failed " + std::to_string(ob.failed) + " CASes on object " +
           std::to_string(ob.object.value) + ", bound " + std::to_string(ob.bound));
    }
    std::set<OpId> seen;
    for (std::size_t i = 0; i < ob.obstructors.size(); ++i) {
      const OpId other = ob.obstructors[i];
      if (!seen.insert(other).second) {
        ++rep.repeat_obstructor_violations;
        note("op " + to_string(other) + " obstructed " + to_string(ob.op) + " twice on object " +
             std::to_string(ob.object.value));
      }
      if (i >= 2) {
        auto oi = op_index.find(other);
        if (oi != op_index.end()) {
          const HlOp& o = hl.ops[oi->second];
          if (o.ret && *o.ret <= ob.update_invoke) {
            ++rep.early_obstructor_violations;
            note("op " + to_string(other) + " completed before " + to_string(ob.op) +
                 " began updating, yet obstructed it a third time or later");
          }
        }
      }
    }
    rep.per_object.push_back(ob);
  }

  // gap between timestamps of operations starting after op's update phase
  for (const auto& b : rep.ops) {
    if (!b.update_start || !b.ts) continue;
    const Step t = *b.update_start;
    std::uint64_t incomplete = 0;
    for (const auto& op : hl.ops) {
      if (op.invoke <= t && ret_or_never(op) > t) ++incomplete;
    }
    for (const auto& other : rep.ops) {
      const HlOp& o = hl.ops[op_index.at(other.op)];
      if (other.op == b.op || !other.ts || o.invoke < t) continue;
      ++rep.tsgap_pairs;
      if (other.ts->num + incomplete + 1 < b.ts->num) {
        ++rep.tsgap_violations;
        note("op " + to_string(other.op) + " has ts.num " + std::to_string(other.ts->num) + " < " +
             std::to_string(b.ts->num) + " - " + std::to_string(incomplete) + " - 1 of " + to_string(b.op));
      }
    }
  }

  // concurrent writes sharing a timestamp number
  for (const auto& b : rep.ops) {
    const HlOp& op = hl.ops[op_index.at(b.op)];
    std::map<std::uint64_t, std::uint32_t> per_num;
    for (const auto& other : rep.ops) {
      if (other.op == b.op || other.kind != HlKind::write || !other.ts) continue;
      if (!overlap(op, hl.ops[op_index.at(other.op)])) continue;
      ++per_num[other.ts->num];
    }
    for (const auto& [num, count] : per_num) {
      if (count > b.pnt_cont) {
        ++rep.same_num_violations;
        note(std::to_string(count) + " writes with ts.num " + std::to_string(num) + " overlap " + to_string(b.op) +
             " whose point contention is " + std::to_string(b.pnt_cont));
      }
    }
  }
  return rep;
}

std::uint64_t resource_consumption(const History& h) {
  std::set<ObjectId> used;
  for (const auto& e : h.events) {
    if (e.object && (e.kind == EventKind::ll_trigger || e.kind == EventKind::ll_apply || e.kind == EventKind::ll_respond)) {
      used.insert(*e.object);
    }
  }
  return used.size();
}

// ---------------------------------------------------------------------------
// Covering adversary replay

AdiReport check_adi(const History& h) {
  AdiReport rep;
  if (h.header.policy != "adi") {
    rep.verdict = Verdict::inapplicable;
    rep.witness = "history was not produced by the covering adversary";
    return rep;
  }
  const std::set<ServerId> faulty(h.header.faulty_set.begin(), h.header.faulty_set.end());
  const std::uint32_t f = h.header.f;
  auto server_of = [&](ObjectId o) { return h.header.placement.at(o); };

  std::map<ObjectId, std::set<OpId>> pending;
  std::set<ObjectId> crashed;
  std::set<ClientId> completed_writers;
  auto covered = [&]() {
    std::set<ObjectId> out;
    for (const auto& [o, ops] : pending) {
      if (!ops.empty() && !crashed.count(o)) out.insert(o);
    }
    return out;
  };

  bool in_epoch = false;  // between W_i's invoke and its return
  std::optional<OpId> writer;
  std::set<ClientId> c_prev;
  std::set<ObjectId> cov_prev;
  std::set<ServerId> q;

  auto close_epoch = [&](Step end) {
    if (rep.epochs.empty()) return;
    auto& ep = rep.epochs.back();
    ep.end = end;
    auto cov = covered();
    ep.cov_size = cov.size();
    for (auto o : cov) ep.cov_in_f += faulty.count(server_of(o));
  };

  for (const auto& e : h.events) {
    if (e.kind == EventKind::ll_apply && e.ll_kind == LlKind::reg_write && e.object && in_epoch) {
      const bool by_past_writer = c_prev.count(e.op.client) > 0;
      const bool on_q = q.count(server_of(*e.object)) > 0;
      if (by_past_writer || on_q) {
        ++rep.conformance_violations;
        if (rep.witness.empty()) {
          rep.witness = "write " + to_string(e.op) + " applied on object " + std::to_string(e.object->value) +
                        " at step " + std::to_string(e.step) + " although the adversary withholds it";
        }
      }
    }
    switch (e.kind) {
      case EventKind::hl_invoke:
        if (e.hl_kind == HlKind::write) {
          close_epoch(e.step - 1);
          AdiEpoch ep;
          ep.epoch = static_cast<std::uint32_t>(rep.epochs.size() + 1);
          ep.writer = e.op;
          ep.start = e.step - 1;
          rep.epochs.push_back(ep);
          writer = e.op;
          in_epoch = true;
          c_prev = completed_writers;
          cov_prev = covered();
          q.clear();
        }
        break;
      case EventKind::hl_return:
        if (e.hl_kind == HlKind::write) completed_writers.insert(e.op.client);
        if (writer && e.op == *writer) in_epoch = false;
        break;
      case EventKind::ll_trigger:
        if (e.ll_kind == LlKind::reg_write && e.object && !crashed.count(*e.object)) pending[*e.object].insert(e.op);
        break;
      case EventKind::ll_apply:
        if (e.ll_kind == LlKind::reg_write && e.object) pending[*e.object].erase(e.op);
        break;
      case EventKind::server_crash:
        for (const auto& [o, s] : h.header.placement) {
          if (e.server && s == *e.server) crashed.insert(o);
        }
        break;
      default:
        break;
    }
    if (writer) {
      auto cov = covered();
      std::set<ServerId> cand;
      for (auto o : cov) {
        if (!cov_prev.count(o) && !faulty.count(server_of(o))) cand.insert(server_of(o));
      }
      if (cand.size() <= f) {
        if (!std::includes(cand.begin(), cand.end(), q.begin(), q.end())) ++rep.q_monotonicity_violations;
        q = std::move(cand);
      }
    }
  }
  close_epoch(h.steps);
  rep.max_point_contention = run_point_contention(h);

  for (const auto& ep : rep.epochs) {
    if (ep.cov_size < static_cast<std::size_t>(ep.epoch) * f || ep.cov_in_f != 0) {
      rep.verdict = Verdict::fail;
      if (rep.witness.empty()) {
        rep.witness = "epoch " + std::to_string(ep.epoch) + " ends with |Cov| = " + std::to_string(ep.cov_size) +
                      " (" + std::to_string(ep.cov_in_f) + " on F), need at least " +
                      std::to_string(ep.epoch * f) + " and none on F";
      }
    }
  }
  if (rep.conformance_violations || rep.q_monotonicity_violations) rep.verdict = Verdict::fail;
  return rep;
}

SimpleResult check_crash_containment(const History& h) {
  SimpleResult res;
  std::set<ObjectId> crashed;
  for (const auto& e : h.events) {
    if (e.kind == EventKind::server_crash && e.server) {
      for (const auto& [o, s] : h.header.placement) {
        if (s == *e.server) crashed.insert(o);
      }
    }
    if ((e.kind == EventKind::ll_apply || e.kind == EventKind::ll_respond) && e.object && crashed.count(*e.object)) {
      ++res.count;
      if (res.witness.empty()) {
        res.witness = std::string(to_string(e.kind)) + " " + to_string(e.op) + " on crashed object " +
                      std::to_string(e.object->value) + " at step " + std::to_string(e.step);
      }
    }
  }
  if (res.count) res.verdict = Verdict::fail;
  return res;
}

SimpleResult check_fairness(const History& h) {
  SimpleResult res;
  if (h.header.policy == "adi") {
    res.verdict = Verdict::inapplicable;
    res.witness = "the covering adversary withholds writes forever by design";
    return res;
  }
  if (h.truncated && h.truncation_reason == "budget") {
    res.verdict = Verdict::inapplicable;
    res.witness = "step budget exhausted";
    return res;
  }
  std::set<ObjectId> crashed_objects;
  std::set<ClientId> crashed_clients;
  std::map<OpId, std::pair<ObjectId, Step>> open;
  for (const auto& e : h.events) {
    switch (e.kind) {
      case EventKind::server_crash:
        for (const auto& [o, s] : h.header.placement) {
          if (e.server && s == *e.server) crashed_objects.insert(o);
        }
        break;
      case EventKind::client_crash: crashed_clients.insert(ClientId{e.actor.id}); break;
      case EventKind::ll_trigger:
        if (e.object) open[e.op] = {*e.object, e.step};
        break;
      case EventKind::ll_respond: open.erase(e.op); break;
      default: break;
    }
  }
  for (const auto& [op, at] : open) {
    if (crashed_objects.count(at.first) || crashed_clients.count(op.client)) continue;
    ++res.count;
    if (res.witness.empty()) {
      res.witness = "trigger " + to_string(op) + " on live object " + std::to_string(at.first.value) + " at step " +
                    std::to_string(at.second) + " never got a response";
    }
  }
  if (res.count) res.verdict = Verdict::fail;
  return res;
}

// ---------------------------------------------------------------------------
// Check registry

std::vector<std::string> all_check_names() {
  return {"wellformed", "lin", "sw", "linpoints", "ts", "bounds", "resource", "adi", "crash", "fairness"};
}

std::vector<std::string> default_checks(const History& h) {
  if (h.header.algorithm == "cas-abd") {
    return {"wellformed", "lin", "linpoints", "ts", "bounds", "resource", "crash", "fairness"};
  }
  std::vector<std::string> out{"wellformed", "sw", "ts", "resource", "crash"};
  out.push_back(h.header.policy == "adi" ? "adi" : "fairness");
  return out;
}

std::vector<CheckOutcome> run_checks(const History& h, const std::vector<std::string>& names) {
  std::vector<CheckOutcome> out;
  std::optional<HlHistory> hl;
  auto hl_view = [&]() -> const HlHistory& {
    if (!hl) hl = project(h);
    return *hl;
  };
  for (const auto& name : names) {
    CheckOutcome c;
    c.name = name;
    if (name == "wellformed") {
      auto v = validate_history(h);
      c.verdict = v.ok ? Verdict::pass : Verdict::fail;
      c.witness = v.message;
    } else if (name == "lin" || name == "sw") {
      auto r = name == "lin" ? check_linearizable(hl_view()) : check_sw_safety(hl_view());
      c.verdict = r.verdict;
      c.witness = r.witness;
      c.metrics["ops"] = std::to_string(hl_view().ops.size());
      if (name == "lin" && h.truncated) c.metrics["pending"] = "include-or-exclude";
    } else if (name == "linpoints") {
      auto r = check_abdo_linpoints(h);
      c.verdict = r.verdict;
      c.witness = r.witness;
      c.metrics["replayed"] = std::to_string(r.replayed);
      c.metrics["excluded"] = std::to_string(r.excluded);
      c.metrics["read_obstructions"] = std::to_string(r.read_obstructions);
    } else if (name == "ts") {
      auto r = check_ts_uniqueness(h);
      c.verdict = r.verdict;
      c.witness = r.witness;
      c.metrics["groups"] = std::to_string(r.groups);
      c.metrics["max_multiplicity"] = std::to_string(r.max_multiplicity);
    } else if (name == "bounds") {
      if (h.header.algorithm != "cas-abd") {
        c.verdict = Verdict::inapplicable;
        c.witness = "history is not from cas-abd";
      } else {
        auto r = check_bounds(h);
        c.verdict = r.ok() ? Verdict::pass : Verdict::fail;
        c.witness = r.witness;
        std::uint32_t pc = 0;
        std::uint64_t total = 0;
        for (const auto& op : r.ops) {
          pc = std::max(pc, op.pnt_cont);
          total = std::max(total, op.total_cas);
        }
        c.metrics["max_pnt_cont"] = std::to_string(pc);
        c.metrics["max_failed_cas"] = std::to_string(r.max_failed());
        c.metrics["max_total_cas"] = std::to_string(total);
        c.metrics["tsgap_pairs"] = std::to_string(r.tsgap_pairs);
        c.metrics["guard_violations"] = std::to_string(r.guard_violations);
        c.metrics["monotonic_violations"] = std::to_string(r.monotonic_violations);
      }
    } else if (name == "resource") {
      const auto used = resource_consumption(h);
      c.metrics["objects"] = std::to_string(used);
      std::uint64_t expected = h.header.algorithm == "cas-abd"
                                   ? h.header.n
                                   : static_cast<std::uint64_t>(h.header.k) * (2 * h.header.f + 1);
      c.metrics["expected"] = std::to_string(expected);
      const bool any_ll = used > 0;
      if (any_ll && used != expected) {
        c.verdict = Verdict::fail;
        c.witness = "run used " + std::to_string(used) + " base objects, expected " + std::to_string(expected);
      }
    } else if (name == "adi") {
      auto r = check_adi(h);
      c.verdict = r.verdict;
      c.witness = r.witness;
      std::ostringstream cov;
      for (const auto& ep : r.epochs) cov << (cov.tellp() > 0 ? "," : "") << ep.cov_size;
      c.metrics["cov"] = cov.str();
      c.metrics["max_point_contention"] = std::to_string(r.max_point_contention);
      c.metrics["conformance_violations"] = std::to_string(r.conformance_violations);
    } else if (name == "crash" || name == "fairness") {
      auto r = name == "crash" ? check_crash_containment(h) : check_fairness(h);
      c.verdict = r.verdict;
      c.witness = r.witness;
      c.metrics["violations"] = std::to_string(r.count);
    } else {
      throw ConfigError("checks", "unknown checker '" + name + "'");
    }
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration

namespace {

struct DigestHasher {
  std::size_t operator()(const StateDigest& k) const { return k.a; }
};

class Explorer {
 public:
  Explorer(const Scenario& sc, const EnumOptions& opt) : sc_(sc), opt_(opt) {}

  double visit(const World& w, std::uint64_t depth) {
    const StateDigest key = w.state_key();
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    if (memo_.size() >= opt_.state_cap) {
      result.capped = true;
      return 0;
    }
    result.max_depth = std::max(result.max_depth, depth);
    auto actions = w.enabled();
    if (actions.empty()) {
      memo_[key] = 1;
      ++result.terminals;
      audit(w);
      return 1;
    }
    if (depth >= opt_.depth) {
      result.depth_exceeded = true;
      memo_[key] = 0;
      return 0;
    }
    // A trigger only moves an op from the client's outbox to the pending set:
    // it commutes with every other action and emits no high-level event, so
    // exploring it alone loses no reachable outcome.
    auto trig = std::find_if(actions.begin(), actions.end(),
                             [](const Action& a) { return a.kind == ActionKind::trigger; });
    if (opt_.reduce && trig != actions.end() && w.storage().crashed_servers() == 0) {
      World next = w;
      next.perform(*trig);
      const double total = visit(next, depth + 1);
      memo_[key] = total;
      return total;
    }
    // A server crash only disables applies and responds on that server's
    // objects and commutes with everything else, so any schedule with crashes
    // can be reordered to crash last. Crashes are therefore tried only where
    // every enabled action lives on servers about to crash, and after a crash
    // nothing but further crashes is explored.
    const auto crashed = w.storage().crashed_servers();
    const std::uint32_t budget = opt_.max_crashes > crashed ? opt_.max_crashes - crashed : 0;
    std::set<std::uint32_t> touched;
    bool local_only = true;
    for (const auto& a : actions) {
      if (a.kind != ActionKind::apply && a.kind != ActionKind::respond) {
        local_only = false;
        break;
      }
      touched.insert(w.storage().placement().server_of(w.ll_ops().at(a.op).object).value);
    }
    std::vector<Action> crashes;
    if (!opt_.reduce) {
      for (std::uint32_t srv = 0; budget > 0 && srv < w.storage().server_count(); ++srv) {
        if (!w.storage().server_crashed(ServerId{srv})) crashes.push_back(Action{ActionKind::crash_server, srv, {}});
      }
    } else if (local_only && budget >= touched.size()) {
      for (auto srv : touched) crashes.push_back(Action{ActionKind::crash_server, srv, {}});
    }
    if (opt_.reduce && crashed > 0) actions.clear();
    actions.insert(actions.end(), crashes.begin(), crashes.end());
    double total = 0;
    for (const auto& a : actions) {
      World next = w;
      next.perform(a);
      total += visit(next, depth + 1);
    }
    memo_[key] = total;
    return total;
  }

  std::size_t states() const { return memo_.size(); }
  std::size_t outcomes() const { return outcomes_.size(); }

  EnumResult result;

 private:
  void flag(const std::string& why) {
    ++result.violations;
    if (result.witness.empty()) result.witness = why;
  }

  void audit(const World& w) {
    StateKey ok;
    for (const auto& e : w.history().events) {
      if (e.kind != EventKind::hl_invoke && e.kind != EventKind::hl_return) continue;
      ok.put(e.kind);
      ok.put(e.op);
      ok.put(e.value);
    }
    ok.put(w.has_pending_high_level());
    if (w.storage().kind() == Storage::Kind::cas) {
      for (std::uint32_t o = 0; o < w.storage().object_count(); ++o) ok.put(w.storage().state(ObjectId{o}));
    }
    outcomes_.insert(ok.digest());
    if (w.has_pending_high_level()) {
      flag("quiescent state with a pending operation after " + std::to_string(w.step()) + " steps");
      return;
    }
    if (!w.diagnostics().clean()) flag("runtime invariant fired");
    HlHistory base = project(w.history());
    auto lin = check_linearizable(base);
    if (lin.verdict != Verdict::pass) {
      flag(lin.witness);
      return;
    }
    // Every quorum of live objects must yield a value some read could return.
    std::vector<ObjectId> live;
    for (std::uint32_t o = 0; o < w.storage().object_count(); ++o) {
      if (!w.storage().object_crashed(ObjectId{o})) live.push_back(ObjectId{o});
    }
    const std::size_t quorum = w.storage().object_count() - sc_.f;
    if (live.size() < quorum || w.storage().kind() != Storage::Kind::cas) return;
    std::vector<bool> pick(live.size(), false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(quorum), true);
    const Step t = w.step();
    do {
      std::optional<TaggedValue> best;
      for (std::size_t i = 0; i < live.size(); ++i) {
        if (!pick[i]) continue;
        const auto& tv = w.storage().state(live[i]);
        if (!best || best->ts < tv.ts) best = tv;
      }
      HlHistory probe = base;
      HlOp rd;
      rd.id = OpId{ClientId{static_cast<std::uint32_t>(sc_.k)}, 0};
      rd.kind = HlKind::read;
      rd.value = best->val;
      rd.invoke = t + 1;
      rd.ret = t + 2;
      probe.ops.push_back(rd);
      auto r = check_linearizable(probe);
      if (r.verdict != Verdict::pass) {
        flag("final read over a quorum: " + r.witness);
        return;
      }
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }

  const Scenario& sc_;
  EnumOptions opt_;
  std::unordered_map<StateDigest, double, DigestHasher> memo_;
  std::set<StateDigest> outcomes_;
};

}  // namespace

EnumResult exhaustive_check(const Scenario& sc, const EnumOptions& opt) {
  sc.validate();
  auto workload = sc.resolved_workload(sc.seed);
  for (const auto& op : workload) {
    if (op.not_before > 0) throw ConfigError("workload", "enumeration does not support not_before constraints");
  }
  if (sc.k > 3 || workload.size() > 4) {
    throw ConfigError("workload", "enumeration is limited to 3 clients and 4 operations");
  }
  World root(sc, std::move(workload), World::Recording::high_level_only);
  Explorer ex(sc, opt);
  const double paths = ex.visit(root, 0);
  EnumResult res = ex.result;
  res.interleavings = paths;
  res.states = ex.states();
  res.outcomes = ex.outcomes();
  if (res.violations) {
    res.verdict = Verdict::fail;
  } else if (res.capped || res.depth_exceeded) {
    res.verdict = Verdict::partial;
  }
  return res;
}

}  // namespace regemu
