#pragma once

#include <string>

#include "cbcast/ids.hpp"

namespace cbcast {

// A payload plus the metadata fixed at broadcast time. The metadata is written
// once by the originator and never mutated through forwarding.
struct StampedMessage {
  std::string payload;
  ProcessId orig;
  ViewId mview = 0;
  VectorTime mvt;
  auto operator<=>(const StampedMessage&) const = default;
};

inline MessageId message_id(const StampedMessage& msg) {
  if (!msg.orig.valid()) throw ConfigError("message_id: unstamped message");
  return MessageId{msg.mview, msg.mvt, msg.orig};
}

}  // namespace cbcast
