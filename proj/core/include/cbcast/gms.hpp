#pragma once

#include <deque>
#include <optional>
#include <set>
#include <vector>

#include "cbcast/packet.hpp"

namespace cbcast {

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ViewChangeRec {
  bool is_join = false;
  ProcessId pid;
  ProcessId parent;  // joins only
  auto operator<=>(const ViewChangeRec&) const = default;
};

// The linear sequence of views. members[i] is view i; changes[i-1] produced
// view i from view i-1.
struct ViewSequence {
  std::vector<std::set<ProcessId>> members;
  std::vector<ViewChangeRec> changes;

  ViewId last_view() const { return members.size() - 1; }
  bool ever_member(const ProcessId& pid) const;
  std::optional<ViewId> join_view(const ProcessId& pid) const;
  std::optional<ViewId> removal_view(const ProcessId& pid) const;
};

// Omniscient in-simulator membership service. Generates the view sequence
// and per-process notification queues; a joiner's own "you are new" record is
// synthesized at fork time rather than queued.
class GmsOracle {
 public:
  explicit GmsOracle(const std::set<ProcessId>& roster);

  ViewId propose_remove(const ProcessId& pid);
  ViewId propose_join(const ProcessId& pid, const ProcessId& parent);

  const ViewSequence& views() const { return seq_; }

  struct Pending {
    ViewId view = 0;
    Notification notification;
  };
  const std::deque<Pending>& queue(const ProcessId& pid) const;
  void pop(const ProcessId& pid);

  void mark_dropped(const ProcessId& pid, ViewId view);
  bool dropped(const ProcessId& pid, ViewId view) const;

 private:
  ViewSequence seq_;
  std::map<ProcessId, std::deque<Pending>> queues_;
  std::set<std::pair<ProcessId, ViewId>> drops_;
  std::set<ProcessId> ever_;
};

}  // namespace cbcast
