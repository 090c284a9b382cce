#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace cbcast {

// Thrown when a protocol precondition is violated. In a conforming run this
// indicates a bug in the surrounding harness, not in the remote peer.
struct ProtocolViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Opaque, totally ordered process identity. Ids are never reused; a removed
// process keeps its id forever. Rendered verbatim in traces.
struct ProcessId {
  std::string id;

  ProcessId() = default;
  explicit ProcessId(std::string s) : id(std::move(s)) {}
  ProcessId(const char* s) : id(s) {}

  bool valid() const { return !id.empty(); }
  auto operator<=>(const ProcessId&) const = default;
};

// View index. View 0 is the initial roster; every later view differs from its
// predecessor by exactly one join or removal.
using ViewId = std::uint64_t;

// Pair of message counters: b counts original broadcasts, f counts forwards.
struct CounterPair {
  std::uint64_t b = 0;
  std::uint64_t f = 0;
  auto operator<=>(const CounterPair&) const = default;
};

inline std::uint64_t counter_total(const CounterPair& c) { return c.b + c.f; }

// Vector time, keyed by exactly the members of the owner's current view.
using VectorTime = std::map<ProcessId, std::uint64_t>;

// Pointwise <= over the shared key set. Keys present on only one side do not
// constrain the comparison.
inline bool vector_time_leq(const VectorTime& a, const VectorTime& b) {
  for (const auto& [pid, val] : a) {
    auto it = b.find(pid);
    if (it != b.end() && val > it->second) return false;
  }
  return true;
}

// (mview, mvt) is globally unique per message; orig rides along for routing.
struct MessageId {
  ViewId mview = 0;
  VectorTime mvt;
  ProcessId orig;
  auto operator<=>(const MessageId&) const = default;
};

}  // namespace cbcast
