#include "cbcast/gms.hpp"

namespace cbcast {

bool ViewSequence::ever_member(const ProcessId& pid) const {
  if (members.empty()) return false;
  if (members.front().count(pid)) return true;
  for (const auto& ch : changes)
    if (ch.is_join && ch.pid == pid) return true;
  return false;
}

std::optional<ViewId> ViewSequence::join_view(const ProcessId& pid) const {
  if (!members.empty() && members.front().count(pid)) return 0;
  for (size_t i = 0; i < changes.size(); ++i) {
    if (changes[i].is_join && changes[i].pid == pid)
      return static_cast<ViewId>(i + 1);
  }
  return std::nullopt;
}

std::optional<ViewId> ViewSequence::removal_view(const ProcessId& pid) const {
  for (size_t i = 0; i < changes.size(); ++i) {
    if (!changes[i].is_join && changes[i].pid == pid)
      return static_cast<ViewId>(i + 1);
  }
  return std::nullopt;
}

GmsOracle::GmsOracle(const std::set<ProcessId>& roster) {
  if (roster.empty()) throw ScenarioError("empty initial roster");
  seq_.members.push_back(roster);
  ever_ = roster;
  for (const auto& pid : roster) queues_[pid];
}

ViewId GmsOracle::propose_remove(const ProcessId& pid) {
  const auto& last = seq_.members.back();
  if (!last.count(pid))
    throw ScenarioError("remove of non-member " + pid.id);
  std::set<ProcessId> next = last;
  next.erase(pid);
  ViewId view = static_cast<ViewId>(seq_.members.size());
  seq_.members.push_back(std::move(next));
  seq_.changes.push_back({false, pid, {}});
  for (const auto& member : seq_.members.back()) {
    queues_[member].push_back(
        {view, Notification{Notification::Kind::Remove, pid, {}}});
  }
  queues_[pid].push_back({view, Notification{Notification::Kind::Dead, {}, {}}});
  return view;
}

ViewId GmsOracle::propose_join(const ProcessId& pid, const ProcessId& parent) {
  const auto& last = seq_.members.back();
  if (ever_.count(pid))
    throw ScenarioError("join of reused id " + pid.id);
  if (!last.count(parent))
    throw ScenarioError("join parent " + parent.id + " is not a member");
  std::set<ProcessId> next = last;
  next.insert(pid);
  ViewId view = static_cast<ViewId>(seq_.members.size());
  // Every member of the preceding view is told about the join; the new
  // process itself learns through the fork.
  for (const auto& member : last) {
    queues_[member].push_back(
        {view, Notification{Notification::Kind::Join, pid, parent}});
  }
  seq_.members.push_back(std::move(next));
  seq_.changes.push_back({true, pid, parent});
  ever_.insert(pid);
  queues_[pid];
  return view;
}

const std::deque<GmsOracle::Pending>& GmsOracle::queue(
    const ProcessId& pid) const {
  static const std::deque<Pending> kEmpty;
  auto it = queues_.find(pid);
  return it == queues_.end() ? kEmpty : it->second;
}

void GmsOracle::pop(const ProcessId& pid) { queues_.at(pid).pop_front(); }

void GmsOracle::mark_dropped(const ProcessId& pid, ViewId view) {
  drops_.insert({pid, view});
}

bool GmsOracle::dropped(const ProcessId& pid, ViewId view) const {
  return drops_.count({pid, view}) > 0;
}

}  // namespace cbcast
