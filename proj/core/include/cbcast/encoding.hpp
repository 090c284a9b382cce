#pragma once

#include <string>
#include <string_view>

#include "cbcast/packet.hpp"

namespace cbcast::codec {

struct CodecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Percent-encoding for opaque byte payloads. [A-Za-z0-9._~-] pass through,
// everything else becomes %XX. Keeps traces greppable while round-tripping
// arbitrary bytes.
std::string pct_encode(std::string_view bytes);
std::string pct_decode(std::string_view text);

// Canonical textual encodings. Field order is fixed; maps render in ascending
// key order. decode(encode(x)) == x for every type here.
std::string encode(const ProcessId& v);
std::string encode(const CounterPair& v);
std::string encode(const VectorTime& v);
std::string encode(const std::map<ProcessId, CounterPair>& v);
std::string encode(const MessageId& v);
std::string encode(const StampedMessage& v);
std::string encode(const WaitRecord& v);
std::string encode(const DonationBody& v);
std::string encode(const Packet& v);
std::string encode(const Notification& v);

ProcessId decode_process_id(std::string_view text);
CounterPair decode_counter(std::string_view text);
VectorTime decode_vector_time(std::string_view text);
std::map<ProcessId, CounterPair> decode_counter_map(std::string_view text);
MessageId decode_message_id(std::string_view text);
StampedMessage decode_message(std::string_view text);
WaitRecord decode_wait_record(std::string_view text);
DonationBody decode_donation_body(std::string_view text);
Packet decode_packet(std::string_view text);
Notification decode_notification(std::string_view text);

// Stable 64-bit content hash used for the trace header's scenario hash.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace cbcast::codec
