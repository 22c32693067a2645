#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "regemu/base.hpp"
#include "regemu/core.hpp"

namespace regemu {

/// Malformed or inconsistent configuration. Carries the offending field and,
/// when parsed from a file, the 1-based line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, std::string message, std::optional<int> line = std::nullopt);

  const std::string& field() const { return field_; }
  const std::string& message() const { return message_; }
  std::optional<int> line() const { return line_; }

 private:
  std::string field_;
  std::string message_;
  std::optional<int> line_;
};

enum class Algorithm { cas_abd, baseline_rw };
enum class PolicyKind { random, sync, crash, adi };

std::string_view to_string(Algorithm a);
std::string_view to_string(PolicyKind p);
Algorithm parse_algorithm(std::string_view text);
PolicyKind parse_policy(std::string_view text);

struct WorkloadOp {
  ClientId client;
  HlKind kind = HlKind::write;
  std::uint64_t payload = 0;
  Step not_before = 0;

  friend bool operator==(const WorkloadOp&, const WorkloadOp&) = default;
};

/// Seeded random workload: `ops` operations spread over the clients.
struct WorkloadGen {
  std::uint32_t ops = 0;
  double read_fraction = 0.5;

  friend bool operator==(const WorkloadGen&, const WorkloadGen&) = default;
};

struct CrashSpec {
  Step step = 0;
  std::optional<ServerId> server;
  std::optional<ClientId> client;

  friend bool operator==(const CrashSpec&, const CrashSpec&) = default;
};

struct ActionWeights {
  std::uint32_t client = 1;
  std::uint32_t apply = 1;
  std::uint32_t respond = 1;

  friend bool operator==(const ActionWeights&, const ActionWeights&) = default;
};

struct AdversarySpec {
  PolicyKind policy = PolicyKind::random;
  bool fair = true;
  std::optional<std::uint64_t> fairness_bound;  // unset: 4nk
  bool unbounded_deferral = false;              // "inf" given in config
  std::vector<CrashSpec> crashes;
  std::vector<ServerId> faulty_set;             // F for the covering adversary
  ActionWeights weights;
  bool beyond_tolerance = false;

  friend bool operator==(const AdversarySpec&, const AdversarySpec&) = default;
};

struct Scenario {
  std::string name = "unnamed";
  Algorithm algorithm = Algorithm::cas_abd;
  std::uint32_t n = 3;
  std::uint32_t f = 1;
  std::uint32_t k = 1;
  std::optional<Placement> placement;  // unset: algorithm default
  std::optional<std::uint32_t> capacity;
  std::optional<ClientId> reader;      // baseline designated reader, default client 0
  std::vector<WorkloadOp> workload;
  std::optional<WorkloadGen> generate;
  AdversarySpec adversary;
  std::uint64_t seed = 0;
  std::uint64_t step_budget = 100000;

  std::uint64_t fairness_bound() const;
  Placement resolved_placement() const;
  std::uint32_t object_count() const;
  ClientId designated_reader() const { return reader.value_or(ClientId{0}); }

  /// Explicit ops, or the generated workload for `run_seed`, or (for the
  /// covering adversary with no workload) one write per client in order.
  std::vector<WorkloadOp> resolved_workload(std::uint64_t run_seed) const;

  /// Throws ConfigError.
  void validate() const;

  /// Stable textual rendering of every field; hashed into report digests.
  std::string canonical() const;
};

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

/// FNV-1a 64-bit; used for scenario digests and trace hashes.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace regemu
