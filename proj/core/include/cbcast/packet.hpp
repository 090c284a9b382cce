#pragma once

#include <map>
#include <variant>
#include <vector>

#include "cbcast/message.hpp"

namespace cbcast {

enum class WaitKind { Bcast, Fwd };

// Sender-side record of an unstable message: the message itself, the outbound
// counter at queuing time, and the set of targets that have not acknowledged.
struct WaitRecord {
  StampedMessage msg;
  CounterPair index;
  std::map<ProcessId, CounterPair> iset;
  WaitKind kind = WaitKind::Bcast;
  auto operator<=>(const WaitRecord&) const = default;
};

// Immutable snapshot exchanged between an existing member and a joiner.
// Later mutation of the donor's state must not leak into an in-flight body,
// so every field is a deep copy.
struct DonationBody {
  std::vector<WaitRecord> wait_set;
  std::map<ProcessId, CounterPair> mpkt_in;
  ViewId ghost_height = 0;
  ViewId flush_height = 0;
  auto operator<=>(const DonationBody&) const = default;
};

struct MsgPacket {
  StampedMessage msg;
  auto operator<=>(const MsgPacket&) const = default;
};
struct AckPacket {
  MessageId id;
  auto operator<=>(const AckPacket&) const = default;
};
struct GhostPacket {
  ViewId view = 0;
  auto operator<=>(const GhostPacket&) const = default;
};
struct FlushPacket {
  ViewId view = 0;
  auto operator<=>(const FlushPacket&) const = default;
};
struct DonationPacket {
  DonationBody body;
  auto operator<=>(const DonationPacket&) const = default;
};
struct CoDonationPacket {
  DonationBody body;
  auto operator<=>(const CoDonationPacket&) const = default;
};

enum class PacketKind { Msg, Ack, Ghost, Flush, Donation, CoDonation };

struct Packet {
  std::variant<MsgPacket, AckPacket, GhostPacket, FlushPacket, DonationPacket,
               CoDonationPacket>
      body;
  // Sender's cur_view + v_gap at the queuing event. Receivers defer a packet
  // until they have dequeued notifications up to this height.
  ViewId piggyback_height = 0;
  auto operator<=>(const Packet&) const = default;
};

inline PacketKind packet_kind(const Packet& p) {
  return static_cast<PacketKind>(p.body.index());
}

// GMS view-change record as seen by one recipient.
struct Notification {
  enum class Kind { Remove, Join, New, Dead };
  Kind kind = Kind::Dead;
  ProcessId pid;     // removed / joining / own id; unused for Dead
  ProcessId parent;  // Join only
  auto operator<=>(const Notification&) const = default;
};

}  // namespace cbcast
