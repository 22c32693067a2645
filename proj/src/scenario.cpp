#include "regemu/scenario.hpp"

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "regemu/protocol.hpp"

namespace regemu {

ConfigError::ConfigError(std::string field, std::string message, std::optional<int> line)
    : std::runtime_error((line ? "line " + std::to_string(*line) + ", " : std::string{}) + "field '" +
                         field + "': " + message),
      field_(std::move(field)),
      message_(std::move(message)),
      line_(line) {}

std::string_view to_string(Algorithm a) {
  return a == Algorithm::cas_abd ? "cas-abd" : "baseline-rw";
}

std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::random: return "random";
    case PolicyKind::sync: return "sync";
    case PolicyKind::crash: return "crash";
    case PolicyKind::adi: return "adi";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "cas-abd") return Algorithm::cas_abd;
  if (text == "baseline-rw") return Algorithm::baseline_rw;
  throw ConfigError("algorithm", "unknown algorithm '" + std::string(text) +
                                     "' (expected cas-abd or baseline-rw)");
}

PolicyKind parse_policy(std::string_view text) {
  if (text == "random") return PolicyKind::random;
  if (text == "sync") return PolicyKind::sync;
  if (text == "crash") return PolicyKind::crash;
  if (text == "adi") return PolicyKind::adi;
  throw ConfigError("adversary.policy", "unknown policy '" + std::string(text) +
                                            "' (expected random, sync, crash or adi)");
}

std::uint64_t Scenario::fairness_bound() const {
  return adversary.fairness_bound.value_or(std::max<std::uint64_t>(1, 4ull * n * k));
}

std::uint32_t Scenario::object_count() const {
  if (placement) return static_cast<std::uint32_t>(placement->size());
  return algorithm == Algorithm::cas_abd ? n : BaselineLayout{k, f}.object_count();
}

Placement Scenario::resolved_placement() const {
  Placement p = placement ? *placement
                          : (algorithm == Algorithm::cas_abd ? Placement::one_object_per_server(n)
                                                             : BaselineLayout{k, f}.default_placement(n));
  auto cap = capacity ? capacity : p.capacity();
  return Placement(p.mapping(), cap);
}

std::vector<WorkloadOp> Scenario::resolved_workload(std::uint64_t run_seed) const {
  if (!workload.empty()) return workload;
  std::vector<WorkloadOp> out;
  if (generate) {
    std::mt19937_64 gen(run_seed * 0x9E3779B97F4A7C15ull ^ 0x5eedull);
    for (std::uint32_t i = 0; i < generate->ops; ++i) {
      WorkloadOp op;
      op.client = ClientId{static_cast<std::uint32_t>(gen() % k)};
      bool read = static_cast<double>(gen() % 1000) < generate->read_fraction * 1000.0;
      op.kind = read ? HlKind::read : HlKind::write;
      if (algorithm == Algorithm::baseline_rw && read) op.client = designated_reader();
      op.payload = 100 + i;
      out.push_back(op);
    }
    return out;
  }
  if (adversary.policy == PolicyKind::adi) {
    for (std::uint32_t c = 0; c < k; ++c) {
      out.push_back(WorkloadOp{ClientId{c}, HlKind::write, 1000 + c, 0});
    }
  }
  return out;
}

void Scenario::validate() const {
  if (n < 1) throw ConfigError("n", "need at least one server");
  if (k < 1) throw ConfigError("k", "need at least one client");
  if (step_budget == 0) throw ConfigError("step_budget", "must be finite and positive");
  const Placement p = resolved_placement();
  try {
    p.validate(n);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError("placement", ex.what());
  }
  if (algorithm == Algorithm::cas_abd) {
    if (n <= 2 * f) throw ConfigError("n", "cas-abd needs n > 2f servers");
    if (p.size() != n) throw ConfigError("placement", "cas-abd uses exactly n CAS objects");
    std::set<ServerId> used;
    for (const auto& [o, s] : p.mapping()) used.insert(s);
    if (used.size() != p.size()) throw ConfigError("placement", "cas-abd needs one object per server");
  } else {
    if (n < 2 * f + 1) throw ConfigError("n", "baseline-rw slots need 2f+1 distinct servers");
    try {
      BaselineLayout{k, f}.validate(p);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError("placement", ex.what());
    }
    if (designated_reader().value >= k) throw ConfigError("reader", "reader is not a client");
  }
  for (const auto& op : workload) {
    if (op.client.value >= k) {
      throw ConfigError("workload", "op for client " + std::to_string(op.client.value) +
                                        " but k = " + std::to_string(k));
    }
    if (algorithm == Algorithm::baseline_rw && op.kind == HlKind::read &&
        op.client != designated_reader()) {
      throw ConfigError("workload", "baseline-rw is single-reader; only client " +
                                        std::to_string(designated_reader().value) + " may read");
    }
  }
  if (generate && generate->ops == 0 && workload.empty() && adversary.policy != PolicyKind::adi) {
    throw ConfigError("workload.generate.ops", "must be positive");
  }
  const auto& adv = adversary;
  if (adv.fair && adv.unbounded_deferral) {
    throw ConfigError("adversary.fairness_bound", "unbounded deferral is not allowed in fair mode");
  }
  if (adv.fairness_bound && *adv.fairness_bound == 0) {
    throw ConfigError("adversary.fairness_bound", "must be at least 1");
  }
  std::set<ServerId> crashed;
  std::set<ClientId> crashed_clients;
  for (const auto& c : adv.crashes) {
    if (c.step == 0 || c.step > step_budget) {
      throw ConfigError("adversary.crashes", "crash step " + std::to_string(c.step) +
                                                 " outside 1..step_budget");
    }
    if (c.server) {
      if (c.server->value >= n) throw ConfigError("adversary.crashes", "unknown server");
      if (!crashed.insert(*c.server).second) {
        throw ConfigError("adversary.crashes",
                          "server " + std::to_string(c.server->value) + " crashed twice");
      }
    } else if (c.client) {
      if (c.client->value >= k) throw ConfigError("adversary.crashes", "unknown client");
      if (!crashed_clients.insert(*c.client).second) {
        throw ConfigError("adversary.crashes", "client crashed twice");
      }
    } else {
      throw ConfigError("adversary.crashes", "crash entry names neither server nor client");
    }
  }
  if (crashed.size() > f && !adv.beyond_tolerance) {
    throw ConfigError("adversary.crashes",
                      "more than f crashes; set beyond_tolerance: true to run such a scenario");
  }
  if (adv.policy == PolicyKind::adi) {
    if (algorithm != Algorithm::baseline_rw) {
      throw ConfigError("adversary.policy",
                        "the covering adversary needs plain-register base objects (baseline-rw)");
    }
    std::set<ServerId> fs(adv.faulty_set.begin(), adv.faulty_set.end());
    if (fs.size() != adv.faulty_set.size() || fs.size() != f) {
      throw ConfigError("adversary.faulty_set", "needs exactly f distinct servers");
    }
    for (auto s : fs) {
      if (s.value >= n) throw ConfigError("adversary.faulty_set", "unknown server");
    }
  }
}

std::string Scenario::canonical() const {
  std::ostringstream o;
  o << "name=" << name << ";alg=" << to_string(algorithm) << ";n=" << n << ";f=" << f << ";k=" << k
    << ";placement=";
  const Placement placed = resolved_placement();
  for (const auto& [ob, s] : placed.mapping()) o << ob.value << ":" << s.value << ",";
  o << ";cap=" << (capacity ? std::to_string(*capacity) : "-");
  o << ";reader=" << designated_reader().value << ";workload=";
  for (const auto& w : workload) {
    o << w.client.value << to_string(w.kind) << w.payload << "@" << w.not_before << ",";
  }
  if (generate) o << ";gen=" << generate->ops << "/" << generate->read_fraction;
  o << ";policy=" << to_string(adversary.policy) << ";fair=" << adversary.fair
    << ";D=" << fairness_bound() << ";crashes=";
  for (const auto& c : adversary.crashes) {
    o << c.step << (c.server ? "s" + std::to_string(c.server->value) : "")
      << (c.client ? "c" + std::to_string(c.client->value) : "") << ",";
  }
  o << ";F=";
  for (auto s : adversary.faulty_set) o << s.value << ",";
  o << ";w=" << adversary.weights.client << "/" << adversary.weights.apply << "/"
    << adversary.weights.respond << ";beyond=" << adversary.beyond_tolerance
    << ";budget=" << step_budget;
  return o.str();
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// ---------------------------------------------------------------------------
// YAML loading

namespace {

int line_of(const YAML::Node& node) { return node.Mark().line + 1; }

[[noreturn]] void fail(const std::string& field, const YAML::Node& node, const std::string& msg) {
  throw ConfigError(field, msg, node.Mark().line >= 0 ? std::optional<int>(line_of(node)) : std::nullopt);
}

template <class T>
T scalar(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) fail(field, node, "expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(field, node, "cannot parse '" + node.Scalar() + "'");
  }
}

void check_keys(const YAML::Node& map, const std::string& where, std::initializer_list<const char*> allowed) {
  for (const auto& kv : map) {
    auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(where.empty() ? key : where + "." + key, kv.first, "unknown key");
  }
}

Placement parse_placement(const YAML::Node& node) {
  const std::string prefix = "one-object-per-server";
  if (node.IsScalar()) {
    auto text = node.Scalar();
    if (text.rfind(prefix, 0) == 0) {
      auto colon = text.find(':');
      if (colon == std::string::npos) fail("placement", node, "expected 'one-object-per-server: n'");
      try {
        return Placement::one_object_per_server(static_cast<std::uint32_t>(std::stoul(text.substr(colon + 1))));
      } catch (const std::exception&) {
        fail("placement", node, "bad server count in '" + text + "'");
      }
    }
    fail("placement", node, "unknown placement shorthand '" + text + "'");
  }
  if (node.IsMap()) {
    check_keys(node, "placement", {"one-object-per-server"});
    return Placement::one_object_per_server(scalar<std::uint32_t>(node[prefix], "placement." + prefix));
  }
  if (!node.IsSequence()) fail("placement", node, "expected shorthand or list of [object, server]");
  std::map<ObjectId, ServerId> m;
  for (const auto& entry : node) {
    std::uint32_t o = 0, s = 0;
    if (entry.IsSequence() && entry.size() == 2) {
      o = scalar<std::uint32_t>(entry[0], "placement");
      s = scalar<std::uint32_t>(entry[1], "placement");
    } else if (entry.IsMap()) {
      check_keys(entry, "placement", {"object", "server"});
      o = scalar<std::uint32_t>(entry["object"], "placement.object");
      s = scalar<std::uint32_t>(entry["server"], "placement.server");
    } else {
      fail("placement", entry, "expected [object, server] or {object, server}");
    }
    if (!m.emplace(ObjectId{o}, ServerId{s}).second) {
      fail("placement", entry, "object " + std::to_string(o) + " placed twice");
    }
  }
  return Placement(std::move(m));
}

WorkloadOp parse_op(const YAML::Node& node) {
  if (!node.IsMap()) fail("workload", node, "expected {client, op, value}");
  check_keys(node, "workload", {"client", "op", "value", "not_before"});
  if (!node["client"]) fail("workload.client", node, "missing");
  if (!node["op"]) fail("workload.op", node, "missing");
  WorkloadOp op;
  op.client = ClientId{scalar<std::uint32_t>(node["client"], "workload.client")};
  auto kind = scalar<std::string>(node["op"], "workload.op");
  if (kind == "read") {
    op.kind = HlKind::read;
  } else if (kind == "write") {
    op.kind = HlKind::write;
    if (!node["value"]) fail("workload.value", node, "write needs a value");
    op.payload = scalar<std::uint64_t>(node["value"], "workload.value");
  } else {
    fail("workload.op", node["op"], "expected read or write");
  }
  if (node["not_before"]) op.not_before = scalar<Step>(node["not_before"], "workload.not_before");
  return op;
}

void parse_workload(const YAML::Node& node, Scenario& sc) {
  if (node.IsSequence()) {
    for (const auto& e : node) sc.workload.push_back(parse_op(e));
    return;
  }
  if (!node.IsMap()) fail("workload", node, "expected a list of ops or {generate: ...}");
  check_keys(node, "workload", {"ops", "generate"});
  if (node["ops"]) {
    for (const auto& e : node["ops"]) sc.workload.push_back(parse_op(e));
  }
  if (node["generate"]) {
    const auto& g = node["generate"];
    check_keys(g, "workload.generate", {"ops", "read_fraction"});
    WorkloadGen gen;
    gen.ops = scalar<std::uint32_t>(g["ops"], "workload.generate.ops");
    if (g["read_fraction"]) {
      gen.read_fraction = scalar<double>(g["read_fraction"], "workload.generate.read_fraction");
      if (gen.read_fraction < 0.0 || gen.read_fraction > 1.0) {
        fail("workload.generate.read_fraction", g["read_fraction"], "must be within [0, 1]");
      }
    }
    sc.generate = gen;
  }
}

void parse_adversary(const YAML::Node& node, Scenario& sc) {
  if (node.IsScalar()) {
    sc.adversary.policy = parse_policy(node.Scalar());
    return;
  }
  if (!node.IsMap()) fail("adversary", node, "expected a policy name or mapping");
  check_keys(node, "adversary", {"policy", "fair", "fairness_bound", "crashes", "faulty_set", "weights",
                                 "beyond_tolerance"});
  auto& adv = sc.adversary;
  if (node["policy"]) {
    try {
      adv.policy = parse_policy(scalar<std::string>(node["policy"], "adversary.policy"));
    } catch (const ConfigError& ex) {
      fail("adversary.policy", node["policy"], ex.message());
    }
  }
  if (node["fair"]) adv.fair = scalar<bool>(node["fair"], "adversary.fair");
  if (node["fairness_bound"]) {
    const auto& d = node["fairness_bound"];
    if (d.IsScalar() && (d.Scalar() == "inf" || d.Scalar() == "infinity")) {
      adv.unbounded_deferral = true;
    } else {
      adv.fairness_bound = scalar<std::uint64_t>(d, "adversary.fairness_bound");
    }
  }
  if (node["beyond_tolerance"]) {
    adv.beyond_tolerance = scalar<bool>(node["beyond_tolerance"], "adversary.beyond_tolerance");
  }
  if (node["crashes"]) {
    for (const auto& c : node["crashes"]) {
      check_keys(c, "adversary.crashes", {"step", "server", "client"});
      CrashSpec spec;
      if (!c["step"]) fail("adversary.crashes.step", c, "missing");
      spec.step = scalar<Step>(c["step"], "adversary.crashes.step");
      if (c["server"]) spec.server = ServerId{scalar<std::uint32_t>(c["server"], "adversary.crashes.server")};
      if (c["client"]) spec.client = ClientId{scalar<std::uint32_t>(c["client"], "adversary.crashes.client")};
      adv.crashes.push_back(spec);
    }
  }
  if (node["faulty_set"]) {
    for (const auto& s : node["faulty_set"]) {
      adv.faulty_set.push_back(ServerId{scalar<std::uint32_t>(s, "adversary.faulty_set")});
    }
  }
  if (node["weights"]) {
    const auto& w = node["weights"];
    check_keys(w, "adversary.weights", {"client", "apply", "respond"});
    if (w["client"]) adv.weights.client = scalar<std::uint32_t>(w["client"], "adversary.weights.client");
    if (w["apply"]) adv.weights.apply = scalar<std::uint32_t>(w["apply"], "adversary.weights.apply");
    if (w["respond"]) adv.weights.respond = scalar<std::uint32_t>(w["respond"], "adversary.weights.respond");
  }
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& ex) {
    throw ConfigError("<document>", ex.msg, ex.mark.line + 1);
  }
  if (!root.IsMap()) throw ConfigError("<document>", "scenario must be a mapping");
  check_keys(root, "", {"name", "algorithm", "n", "f", "k", "placement", "capacity", "reader", "workload",
                        "adversary", "seed", "step_budget", "budget"});
  Scenario sc;
  if (root["name"]) sc.name = scalar<std::string>(root["name"], "name");
  if (root["algorithm"]) {
    try {
      sc.algorithm = parse_algorithm(scalar<std::string>(root["algorithm"], "algorithm"));
    } catch (const ConfigError&) {
      fail("algorithm", root["algorithm"], "unknown algorithm '" + root["algorithm"].Scalar() +
                                               "' (expected cas-abd or baseline-rw)");
    }
  }
  if (root["n"]) sc.n = scalar<std::uint32_t>(root["n"], "n");
  if (root["f"]) sc.f = scalar<std::uint32_t>(root["f"], "f");
  if (root["k"]) sc.k = scalar<std::uint32_t>(root["k"], "k");
  if (root["placement"]) sc.placement = parse_placement(root["placement"]);
  if (root["capacity"]) sc.capacity = scalar<std::uint32_t>(root["capacity"], "capacity");
  if (root["reader"]) sc.reader = ClientId{scalar<std::uint32_t>(root["reader"], "reader")};
  if (root["workload"]) parse_workload(root["workload"], sc);
  if (root["adversary"]) parse_adversary(root["adversary"], sc);
  if (root["seed"]) sc.seed = scalar<std::uint64_t>(root["seed"], "seed");
  if (root["step_budget"]) sc.step_budget = scalar<std::uint64_t>(root["step_budget"], "step_budget");
  if (root["budget"]) sc.step_budget = scalar<std::uint64_t>(root["budget"], "budget");
  try {
    sc.validate();
  } catch (const ConfigError& ex) {
    // Attach the line of the top-level key when validation names one.
    auto top = ex.field().substr(0, ex.field().find('.'));
    if (!ex.line() && root[top]) throw ConfigError(ex.field(), ex.message(), line_of(root[top]));
    throw;
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--scenario", "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace regemu
