#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>

#include "regemu/core.hpp"

namespace regemu {

/// 128-bit digest of simulator state, used for deduplication during enumeration.
struct StateDigest {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  friend bool operator==(const StateDigest&, const StateDigest&) = default;
  friend auto operator<=>(const StateDigest&, const StateDigest&) = default;
};

/// Streams 64-bit words into two independently seeded hash chains.
struct StateKey {
  std::uint64_t h1 = 0x243f6a8885a308d3ull;
  std::uint64_t h2 = 0x13198a2e03707344ull;
  std::uint64_t words = 0;

  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  template <typename T>
    requires std::is_integral_v<T> || std::is_enum_v<T>
  void put(T v) {
    const auto u = static_cast<std::uint64_t>(v);
    h1 = (h1 ^ u) * 0x9e3779b97f4a7c15ull;
    h1 ^= h1 >> 29;
    h2 = (h2 + u) * 0xff51afd7ed558ccdull;
    h2 ^= h2 >> 31;
    ++words;
  }
  void put(const StateDigest& d) {
    put(d.a);
    put(d.b);
  }
  StateDigest digest() const { return {mix(h1 ^ words), mix(h2 + words)}; }
  void put(const Timestamp& t) {
    put(t.num);
    put(t.c.value);
  }
  void put(const Value& v) {
    put(v.payload);
    put(v.writer.has_value());
    if (v.writer) put(v.writer->value);
    put(v.seq);
  }
  void put(const TaggedValue& tv) {
    put(tv.ts);
    put(tv.val);
  }
  void put(const OpId& id) {
    put(id.client.value);
    put(id.seq);
  }
  template <typename T>
  void put(const std::optional<T>& o) {
    put(o.has_value());
    if (o) put(*o);
  }
};

}  // namespace regemu
