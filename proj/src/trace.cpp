#include "regemu/trace.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace regemu {

using nlohmann::json;

namespace {

json tv_json(const TaggedValue& tv) {
  return json::array({tv.ts.num, tv.ts.c.value, tv.val.payload,
                      tv.val.writer ? static_cast<std::int64_t>(tv.val.writer->value) : -1,
                      tv.val.seq});
}

json value_json(const Value& v) {
  return json::array(
      {v.payload, v.writer ? static_cast<std::int64_t>(v.writer->value) : -1, v.seq});
}

json ts_json(const Timestamp& ts) { return json::array({ts.num, ts.c.value}); }

Value value_from(const json& j) {
  Value v;
  v.payload = j.at(0).get<std::uint64_t>();
  auto w = j.at(1).get<std::int64_t>();
  if (w >= 0) v.writer = ClientId{static_cast<std::uint32_t>(w)};
  v.seq = j.at(2).get<std::uint64_t>();
  return v;
}

Timestamp ts_from(const json& j) {
  return Timestamp{j.at(0).get<std::uint64_t>(), ClientId{j.at(1).get<std::uint32_t>()}};
}

TaggedValue tv_from(const json& j) {
  if (!j.is_array() || j.size() != 5) throw std::invalid_argument("tagged value must be a 5-array");
  TaggedValue tv;
  tv.ts = Timestamp{j[0].get<std::uint64_t>(), ClientId{j[1].get<std::uint32_t>()}};
  tv.val = value_from(json::array({j[2], j[3], j[4]}));
  return tv;
}

json note_json(const AbdoNote& n) {
  json j;
  j["id"] = to_string(n.id);
  j["ev"] = n.invoke ? "invoke" : "return";
  j["kind"] = std::string(to_string(n.kind));
  j["obj"] = n.object.value;
  j["hl"] = to_string(n.hl);
  if (n.ts) j["ts"] = ts_json(*n.ts);
  if (n.val) j["val"] = value_json(*n.val);
  if (n.ret) j["ret"] = tv_json(*n.ret);
  if (n.lp) j["lp"] = std::string(to_string(*n.lp));
  return j;
}

AbdoNote note_from(const json& j) {
  AbdoNote n;
  n.id = parse_op_id(j.at("id").get<std::string>());
  n.invoke = j.at("ev").get<std::string>() == "invoke";
  n.kind = parse_abdo_kind(j.at("kind").get<std::string>());
  n.object = ObjectId{j.at("obj").get<std::uint32_t>()};
  n.hl = parse_op_id(j.at("hl").get<std::string>());
  if (j.contains("ts")) n.ts = ts_from(j["ts"]);
  if (j.contains("val")) n.val = value_from(j["val"]);
  if (j.contains("ret")) n.ret = tv_from(j["ret"]);
  if (j.contains("lp")) n.lp = parse_lin_point(j["lp"].get<std::string>());
  return n;
}

json event_json(const Event& e) {
  json p = json::object();
  if (e.hl_kind) p["hl"] = std::string(to_string(*e.hl_kind));
  if (e.value) p["value"] = value_json(*e.value);
  if (e.parent) p["parent"] = to_string(*e.parent);
  if (e.object) p["obj"] = e.object->value;
  if (e.ll_kind) p["ll"] = std::string(to_string(*e.ll_kind));
  if (e.abdo) p["abdo_op"] = to_string(*e.abdo);
  if (e.expected) p["exp"] = tv_json(*e.expected);
  if (e.desired) p["new"] = tv_json(*e.desired);
  if (e.prev) p["prev"] = tv_json(*e.prev);
  if (e.after) p["after"] = tv_json(*e.after);
  if (e.server) p["server"] = e.server->value;
  if (!e.abdo_notes.empty()) {
    json notes = json::array();
    for (const auto& n : e.abdo_notes) notes.push_back(note_json(n));
    p["abdo"] = std::move(notes);
  }
  json j;
  j["step"] = e.step;
  j["kind"] = std::string(to_string(e.kind));
  j["actor"] = to_string(e.actor);
  const bool crash = e.kind == EventKind::server_crash || e.kind == EventKind::client_crash;
  j["op"] = crash ? std::string("-") : to_string(e.op);
  j["payload"] = std::move(p);
  return j;
}

Event event_from(const json& j) {
  Event e;
  e.step = j.at("step").get<Step>();
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  e.actor = parse_actor(j.at("actor").get<std::string>());
  const auto op_text = j.at("op").get<std::string>();
  if (op_text != "-") e.op = parse_op_id(op_text);
  const json& p = j.at("payload");
  if (p.contains("hl")) e.hl_kind = parse_hl_kind(p["hl"].get<std::string>());
  if (p.contains("value")) e.value = value_from(p["value"]);
  if (p.contains("parent")) e.parent = parse_op_id(p["parent"].get<std::string>());
  if (p.contains("obj")) e.object = ObjectId{p["obj"].get<std::uint32_t>()};
  if (p.contains("ll")) e.ll_kind = parse_ll_kind(p["ll"].get<std::string>());
  if (p.contains("abdo_op")) e.abdo = parse_op_id(p["abdo_op"].get<std::string>());
  if (p.contains("exp")) e.expected = tv_from(p["exp"]);
  if (p.contains("new")) e.desired = tv_from(p["new"]);
  if (p.contains("prev")) e.prev = tv_from(p["prev"]);
  if (p.contains("after")) e.after = tv_from(p["after"]);
  if (p.contains("server")) e.server = ServerId{p["server"].get<std::uint32_t>()};
  if (p.contains("abdo")) {
    for (const auto& n : p["abdo"]) e.abdo_notes.push_back(note_from(n));
  }
  return e;
}

json header_json(const RunHeader& h) {
  json j;
  j["scenario"] = h.scenario;
  j["algorithm"] = h.algorithm;
  j["n"] = h.n;
  j["f"] = h.f;
  j["k"] = h.k;
  j["seed"] = h.seed;
  j["policy"] = h.policy;
  json pl = json::array();
  for (const auto& [o, s] : h.placement) pl.push_back(json::array({o.value, s.value}));
  j["placement"] = std::move(pl);
  json fs = json::array();
  for (auto s : h.faulty_set) fs.push_back(s.value);
  j["faulty_set"] = std::move(fs);
  if (h.reader) j["reader"] = h.reader->value;
  return j;
}

RunHeader header_from(const json& j) {
  RunHeader h;
  h.scenario = j.at("scenario").get<std::string>();
  h.algorithm = j.at("algorithm").get<std::string>();
  h.n = j.at("n").get<std::uint32_t>();
  h.f = j.at("f").get<std::uint32_t>();
  h.k = j.at("k").get<std::uint32_t>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.policy = j.value("policy", std::string{});
  for (const auto& p : j.at("placement")) {
    h.placement[ObjectId{p.at(0).get<std::uint32_t>()}] = ServerId{p.at(1).get<std::uint32_t>()};
  }
  if (j.contains("faulty_set")) {
    for (const auto& s : j["faulty_set"]) h.faulty_set.push_back(ServerId{s.get<std::uint32_t>()});
  }
  if (j.contains("reader")) h.reader = ClientId{j["reader"].get<std::uint32_t>()};
  return h;
}

}  // namespace

std::string event_to_line(const Event& e) { return event_json(e).dump(); }

void write_trace(std::ostream& out, const History& h) {
  json head;
  head["header"] = header_json(h.header);
  out << head.dump() << '\n';
  for (const auto& e : h.events) out << event_json(e).dump() << '\n';
  json foot;
  foot["footer"] = json{{"steps", h.steps}, {"truncated", h.truncated}, {"reason", h.truncation_reason}};
  out << foot.dump() << '\n';
}

std::string write_trace(const History& h) {
  std::ostringstream out;
  write_trace(out, h);
  return out.str();
}

History parse_trace(std::string_view text) {
  History h;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      json j = json::parse(line);
      if (j.contains("header")) {
        h.header = header_from(j["header"]);
        have_header = true;
      } else if (j.contains("footer")) {
        const auto& f = j["footer"];
        h.steps = f.at("steps").get<Step>();
        h.truncated = f.at("truncated").get<bool>();
        h.truncation_reason = f.value("reason", std::string{});
      } else {
        h.events.push_back(event_from(j));
      }
    } catch (const std::exception& ex) {
      throw std::invalid_argument("trace line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  if (!have_header) throw std::invalid_argument("trace has no header record");
  return h;
}

History read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open trace file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

}  // namespace regemu
