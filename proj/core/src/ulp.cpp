#include "cbcast/ulp.hpp"

#include "cbcast/encoding.hpp"

namespace cbcast {

std::size_t DeliveryLog::message_count() const {
  std::size_t n = 0;
  for (const auto& e : entries)
    if (e.kind == Entry::Kind::Message) ++n;
  return n;
}

std::string DeliveryLog::render() const {
  std::string out;
  for (const auto& e : entries) {
    switch (e.kind) {
      case Entry::Kind::Message:
        out += "msg " + e.pid.id + " " + codec::pct_encode(e.payload) + "\n";
        break;
      case Entry::Kind::Join:
        out += "join " + e.pid.id + "\n";
        break;
      case Entry::Kind::Removal:
        out += "removal " + e.pid.id + "\n";
        break;
    }
  }
  return out;
}

DeliveryLog log_ground_state() { return DeliveryLog{}; }

void log_apply_message(DeliveryLog& log, const std::string& payload,
                       const ProcessId& originator) {
  log.entries.push_back(
      {DeliveryLog::Entry::Kind::Message, payload, originator});
}

void log_apply_join(DeliveryLog& log, const ProcessId& pid) {
  log.entries.push_back({DeliveryLog::Entry::Kind::Join, "", pid});
}

void log_apply_removal(DeliveryLog& log, const ProcessId& pid) {
  log.entries.push_back({DeliveryLog::Entry::Kind::Removal, "", pid});
}

std::optional<std::string> MainScript::step(std::uint64_t now,
                                            const DeliveryLog& data) {
  if (exhausted()) return std::nullopt;
  const Step& s = steps[next];
  bool ready = false;
  if (s.at_tick && *s.at_tick <= now) ready = true;
  if (s.after_deliveries && data.message_count() >= *s.after_deliveries)
    ready = true;
  if (!ready) return std::nullopt;
  ++next;
  return s.payload;
}

bool MainScript::pending_timed(std::uint64_t now) const {
  for (std::size_t i = next; i < steps.size(); ++i)
    if (steps[i].at_tick && *steps[i].at_tick > now) return true;
  return false;
}

}  // namespace cbcast
