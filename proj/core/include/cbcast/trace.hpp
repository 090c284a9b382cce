#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbcast/packet.hpp"

namespace cbcast {

struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One replayed sub-transaction inside a donation or co-donation processing
// event: a cloned message receipt or a cloned ack receipt.
struct SubTransaction {
  bool is_message = false;
  MessageId id;
  bool takeup = false;   // message clones that were not duplicates
  bool noop = false;     // ack clones that found no wait record
  auto operator<=>(const SubTransaction&) const = default;
};

// One recorded trigger, side effect, delivery, installation, halt or discard.
struct TraceEvent {
  enum class Kind {
    Notify,
    PacketIn,
    RequestIn,
    Queue,
    Deliver,
    Install,
    Halt,
    Discard
  };
  std::uint64_t seq = 0;
  std::uint64_t tick = 0;
  ProcessId process;
  Kind kind = Kind::Notify;

  // Notify
  ViewId view = 0;
  Notification notification;
  // PacketIn / Discard: peer = sender. Queue: targets.
  ProcessId peer;
  Packet packet;
  bool takeup = false;
  bool noop_ack = false;
  std::vector<SubTransaction> subs;
  std::vector<ProcessId> targets;
  // RequestIn / Deliver
  std::string payload;
  MessageId mid;  // Deliver
  // Install
  std::uint64_t gap = 0;
};

struct ParsedTrace {
  std::string scenario_hash;
  std::uint64_t seed = 0;
  std::string prng;
  std::vector<TraceEvent> events;
  bool quiescent = false;
  std::uint64_t ticks = 0;
};

// Serialization of single events and whole traces. The byte format is the
// deterministic contract checked by the determinism acceptance criterion.
std::string render_trace_header(std::string_view scenario_hash,
                                std::uint64_t seed);
std::string render_trace_event(const TraceEvent& ev);
std::string render_trace_end(bool quiescent, std::uint64_t ticks,
                             std::uint64_t events);

ParsedTrace parse_trace(std::string_view text);
std::string render_trace(const ParsedTrace& trace);

}  // namespace cbcast
