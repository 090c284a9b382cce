#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbcast/ids.hpp"

namespace cbcast {

// Application callback interface. Callbacks run inside the owning process's
// transaction and may touch only their replicated data; they never broadcast.
class Ulp {
 public:
  virtual ~Ulp() = default;
  virtual void ground_state() = 0;
  virtual void apply_message(const std::string& payload,
                             const ProcessId& originator) = 0;
  virtual void apply_join(const ProcessId& pid) = 0;
  virtual void apply_removal(const ProcessId& pid) = 0;
};

// Reference replicated data: an append-only delivery log.
struct DeliveryLog {
  struct Entry {
    enum class Kind { Message, Join, Removal };
    Kind kind = Kind::Message;
    std::string payload;  // Message only
    ProcessId pid;        // originator / joined / removed
    auto operator<=>(const Entry&) const = default;
  };
  std::vector<Entry> entries;

  std::size_t message_count() const;
  // Canonical line-per-entry rendering, used by golden tests.
  std::string render() const;
  auto operator<=>(const DeliveryLog&) const = default;
};

DeliveryLog log_ground_state();
void log_apply_message(DeliveryLog& log, const std::string& payload,
                       const ProcessId& originator);
void log_apply_join(DeliveryLog& log, const ProcessId& pid);
void log_apply_removal(DeliveryLog& log, const ProcessId& pid);

// Ulp over a DeliveryLog. The log lives outside so the harness can snapshot
// it when a process forks.
class LogUlp : public Ulp {
 public:
  explicit LogUlp(DeliveryLog& log) : log_(&log) {}
  void ground_state() override { *log_ = log_ground_state(); }
  void apply_message(const std::string& payload,
                     const ProcessId& originator) override {
    log_apply_message(*log_, payload, originator);
  }
  void apply_join(const ProcessId& pid) override {
    log_apply_join(*log_, pid);
  }
  void apply_removal(const ProcessId& pid) override {
    log_apply_removal(*log_, pid);
  }

 private:
  DeliveryLog* log_;
};

// Deterministic stand-in for the free-running application thread. The
// simulator grants one slot per tick; each grant emits at most one broadcast
// request. Steps fire in order, each gated by a tick or a delivery count.
struct MainScript {
  struct Step {
    std::optional<std::uint64_t> at_tick;
    std::optional<std::uint64_t> after_deliveries;
    std::string payload;
  };
  std::vector<Step> steps;
  std::size_t next = 0;

  bool exhausted() const { return next >= steps.size(); }
  // One scheduler grant. Read-only view of the replicated data.
  std::optional<std::string> step(std::uint64_t now, const DeliveryLog& data);
  // True if some pending step could still fire at a later tick.
  bool pending_timed(std::uint64_t now) const;
};

}  // namespace cbcast
