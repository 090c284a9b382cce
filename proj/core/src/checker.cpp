#include "cbcast/checker.hpp"

#include <algorithm>
#include <optional>
#include <tuple>

#include "cbcast/encoding.hpp"

namespace cbcast {

namespace {

using Ev = TraceEvent;
using Kind = TraceEvent::Kind;

constexpr std::uint64_t kNever = ~0ULL;

struct ChannelView {
  std::vector<const Ev*> queued;    // queue events targeting this channel
  std::vector<const Ev*> consumed;  // packet-in and discard events, in order
};

struct ProcView {
  std::vector<const Ev*> events;
  std::vector<const Ev*> notifies;
  std::uint64_t first_seq = kNever;
  std::uint64_t halt_seq = kNever;
  ViewId join_view = 0;
  bool has_join_view = false;
};

// Everything the individual checks need, built in one pass.
struct Index {
  const ParsedTrace* trace = nullptr;
  std::map<ProcessId, ProcView> procs;
  std::map<std::pair<ProcessId, ProcessId>, ChannelView> chans;

  // View sequence reconstructed from notification contents.
  std::vector<std::set<ProcessId>> members;  // members[v]
  std::vector<ViewChangeRec> changes;        // changes[v-1] -> view v
  bool views_complete = true;
  std::string view_problem;

  std::map<ProcessId, ViewId> removal_view;  // absent = never removed
  std::map<ProcessId, ProcessId> parent_of;
  std::map<ProcessId, std::uint64_t> fork_seq;  // parent's join-notify seq

  // Message-level facts.
  std::map<ProcessId, std::map<MessageId, std::uint64_t>> delivered;  // seq
  std::map<ProcessId, std::vector<std::pair<std::uint64_t, MessageId>>>
      deliveries_in_order;
  std::map<MessageId, std::pair<ProcessId, std::uint64_t>> origin_broadcast;
  std::map<ProcessId, std::vector<std::pair<std::uint64_t, MessageId>>>
      broadcasts_by;  // original broadcasts per process, in order
  struct Takeup {
    std::uint64_t seq = 0;
    ProcessId from;
  };
  std::map<ProcessId, std::map<MessageId, std::vector<Takeup>>> takeups;
  std::map<ProcessId, std::set<MessageId>> received;  // incl. replayed clones
  struct Install {
    std::uint64_t seq = 0;
    ViewId view = 0;
    std::uint64_t gap = 0;
  };
  std::map<ProcessId, std::vector<Install>> installs;

  // Fixpoints over the fork DAG.
  std::map<ProcessId, std::set<MessageId>> inherited_familiar;
  std::map<ProcessId, std::set<MessageId>> inherited_received;
  std::map<ProcessId, std::set<MessageId>> inherited_takeup;
  // Highest delivered stamp per (view, originator) carried across the fork;
  // a joiner's own deliveries continue from there.
  std::map<ProcessId, std::map<std::pair<ViewId, ProcessId>, std::uint64_t>>
      inherited_delivery_count;

  bool is_member(const ProcessId& pid, ViewId v) const {
    return v < members.size() && members[v].count(pid) > 0;
  }
  ViewId rdv(const ProcessId& pid) const {  // removal view, or "infinity"
    auto it = removal_view.find(pid);
    return it == removal_view.end() ? static_cast<ViewId>(kNever) : it->second;
  }
  bool familiar(const ProcessId& pid, const MessageId& m,
                std::uint64_t before_seq) const {
    auto inh = inherited_familiar.find(pid);
    if (inh != inherited_familiar.end() && inh->second.count(m)) return true;
    auto del = delivered.find(pid);
    if (del == delivered.end()) return false;
    auto it = del->second.find(m);
    return it != del->second.end() && it->second < before_seq;
  }
  bool familiar_ever(const ProcessId& pid, const MessageId& m) const {
    return familiar(pid, m, kNever);
  }
};

bool is_msg(const Packet& p) { return packet_kind(p) == PacketKind::Msg; }

const StampedMessage& msg_of(const Packet& p) {
  return std::get<MsgPacket>(p.body).msg;
}

Index build_index(const ParsedTrace& trace) {
  Index ix;
  ix.trace = &trace;

  std::map<ViewId, ViewChangeRec> change_at;
  std::map<ViewId, std::uint64_t> first_conflict;

  for (const auto& ev : trace.events) {
    auto& pv = ix.procs[ev.process];
    pv.events.push_back(&ev);
    if (pv.first_seq == kNever) pv.first_seq = ev.seq;
    switch (ev.kind) {
      case Kind::Notify: {
        pv.notifies.push_back(&ev);
        const Notification& n = ev.notification;
        if (n.kind == Notification::Kind::New) {
          pv.join_view = ev.view;
          pv.has_join_view = true;
        }
        ViewChangeRec rec;
        bool carries_change = true;
        switch (n.kind) {
          case Notification::Kind::Remove:
            rec = {false, n.pid, {}};
            break;
          case Notification::Kind::Dead:
            rec = {false, ev.process, {}};
            break;
          case Notification::Kind::Join:
            rec = {true, n.pid, n.parent};
            // The fork is the parent's dequeue of this notification.
            if (ev.process == n.parent) ix.fork_seq.emplace(n.pid, ev.seq);
            break;
          case Notification::Kind::New:
            if (ev.view == 0) {
              carries_change = false;
            } else {
              rec = {true, ev.process, {}};  // parent learned from joins
            }
            break;
        }
        if (carries_change && ev.view > 0) {
          auto [it, inserted] = change_at.emplace(ev.view, rec);
          if (!inserted) {
            ViewChangeRec& have = it->second;
            bool compatible =
                have.is_join == rec.is_join && have.pid == rec.pid &&
                (!rec.is_join || !have.parent.valid() ||
                 !rec.parent.valid() || have.parent == rec.parent);
            if (compatible) {
              if (rec.is_join && rec.parent.valid()) have.parent = rec.parent;
            } else if (!first_conflict.count(ev.view)) {
              first_conflict[ev.view] = ev.seq;
            }
          }
        }
        break;
      }
      case Kind::PacketIn: {
        ix.chans[{ev.peer, ev.process}].consumed.push_back(&ev);
        if (is_msg(ev.packet)) {
          MessageId id = message_id(msg_of(ev.packet));
          ix.received[ev.process].insert(id);
          if (ev.takeup)
            ix.takeups[ev.process][id].push_back({ev.seq, ev.peer});
        }
        for (const auto& sub : ev.subs) {
          if (sub.is_message) {
            ix.received[ev.process].insert(sub.id);
            if (sub.takeup)
              ix.takeups[ev.process][sub.id].push_back({ev.seq, ev.peer});
          }
        }
        break;
      }
      case Kind::Discard:
        ix.chans[{ev.peer, ev.process}].consumed.push_back(&ev);
        break;
      case Kind::Queue: {
        for (const auto& t : ev.targets)
          ix.chans[{ev.process, t}].queued.push_back(&ev);
        if (is_msg(ev.packet)) {
          const StampedMessage& m = msg_of(ev.packet);
          if (m.orig == ev.process) {
            MessageId id = message_id(m);
            ix.origin_broadcast.emplace(id,
                                        std::make_pair(ev.process, ev.seq));
            ix.broadcasts_by[ev.process].emplace_back(ev.seq, id);
          }
        }
        break;
      }
      case Kind::Deliver:
        ix.delivered[ev.process].emplace(ev.mid, ev.seq);
        ix.deliveries_in_order[ev.process].emplace_back(ev.seq, ev.mid);
        break;
      case Kind::Install:
        ix.installs[ev.process].push_back({ev.seq, ev.view, ev.gap});
        break;
      case Kind::Halt:
        if (pv.halt_seq == kNever) pv.halt_seq = ev.seq;
        break;
      case Kind::RequestIn:
        break;
    }
  }

  // View 0 = processes born with a view-0 notification.
  std::set<ProcessId> v0;
  for (const auto& [pid, pv] : ix.procs)
    if (pv.has_join_view && pv.join_view == 0) v0.insert(pid);
  ix.members.push_back(v0);
  ViewId v = 1;
  while (true) {
    auto it = change_at.find(v);
    if (it == change_at.end()) break;
    if (first_conflict.count(v)) {
      ix.views_complete = false;
      ix.view_problem =
          "conflicting notifications for view " + std::to_string(v);
      break;
    }
    std::set<ProcessId> next = ix.members.back();
    const ViewChangeRec& ch = it->second;
    if (ch.is_join) {
      next.insert(ch.pid);
      if (ch.parent.valid()) ix.parent_of[ch.pid] = ch.parent;
    } else {
      next.erase(ch.pid);
      ix.removal_view[ch.pid] = v;
    }
    ix.members.push_back(std::move(next));
    ix.changes.push_back(ch);
    ++v;
  }
  if (change_at.upper_bound(v) != change_at.end()) {
    ix.views_complete = false;
    if (ix.view_problem.empty())
      ix.view_problem = "gap in the view sequence at view " + std::to_string(v);
  }

  // Inheritance fixpoints, parents before children (join views increase).
  std::vector<std::pair<ViewId, ProcessId>> order;
  for (const auto& [pid, pv] : ix.procs)
    order.emplace_back(pv.has_join_view ? pv.join_view : 0, pid);
  std::sort(order.begin(), order.end());
  for (const auto& [jv, pid] : order) {
    auto parent = ix.parent_of.find(pid);
    if (parent == ix.parent_of.end()) {
      ix.inherited_familiar[pid];
      ix.inherited_received[pid];
      ix.inherited_takeup[pid];
      continue;
    }
    const ProcessId& par = parent->second;
    std::uint64_t fork = kNever;
    if (auto fs = ix.fork_seq.find(pid); fs != ix.fork_seq.end())
      fork = fs->second;
    std::set<MessageId> fam = ix.inherited_familiar[par];
    for (const auto& [mid, seq] : ix.delivered[par])
      if (seq < fork) fam.insert(mid);
    std::set<MessageId> rcv = ix.inherited_received[par];
    for (const Ev* ev : ix.procs[par].events) {
      if (ev->seq >= fork) break;
      if (ev->kind == Kind::PacketIn) {
        if (is_msg(ev->packet)) rcv.insert(message_id(msg_of(ev->packet)));
        for (const auto& sub : ev->subs)
          if (sub.is_message) rcv.insert(sub.id);
      }
    }
    std::set<MessageId> tk = ix.inherited_takeup[par];
    for (const auto& [mid, ups] : ix.takeups[par])
      for (const auto& up : ups)
        if (up.seq < fork) tk.insert(mid);
    auto counts = ix.inherited_delivery_count[par];
    for (const auto& [mid, seq] : ix.delivered[par]) {
      if (seq >= fork) continue;
      auto stamp = mid.mvt.find(mid.orig);
      if (stamp == mid.mvt.end()) continue;
      auto& slot = counts[{mid.mview, mid.orig}];
      slot = std::max(slot, stamp->second);
    }
    ix.inherited_familiar[pid] = std::move(fam);
    ix.inherited_received[pid] = std::move(rcv);
    ix.inherited_takeup[pid] = std::move(tk);
    ix.inherited_delivery_count[pid] = std::move(counts);
  }
  return ix;
}

Verdict make(const char* property, Verdict::Result r, std::string detail = "",
             std::vector<std::uint64_t> evidence = {}, bool hard = true) {
  Verdict v;
  v.property = property;
  v.result = r;
  v.detail = std::move(detail);
  v.evidence = std::move(evidence);
  v.hard = hard;
  return v;
}

}  // namespace

bool CheckReport::all_hard_pass() const {
  for (const auto& v : verdicts)
    if (v.hard && v.result == Verdict::Result::Fail) return false;
  return true;
}

const Verdict* CheckReport::find(std::string_view property) const {
  for (const auto& v : verdicts)
    if (v.property == property) return &v;
  return nullptr;
}

std::string CheckReport::render() const {
  std::string out;
  for (const auto& v : verdicts) {
    const char* res = "PASS";
    if (v.result == Verdict::Result::Fail) res = "FAIL";
    if (v.result == Verdict::Result::Inconclusive) res = "INCONCLUSIVE";
    if (v.result == Verdict::Result::Info) res = "INFO";
    out += "verdict " + v.property + " " + res + " " +
           (v.detail.empty() ? "-" : codec::pct_encode(v.detail)) + "\n";
    if (v.result == Verdict::Result::Fail) {
      out += "counterexample " + v.property + " ";
      if (v.evidence.empty()) {
        out += "-";
      } else {
        bool first = true;
        for (auto s : v.evidence) {
          if (!first) out += ",";
          first = false;
          out += std::to_string(s);
        }
      }
      out += " " + codec::pct_encode(v.detail) + "\n";
    }
  }
  return out;
}

Verdict check_causal_order(const ParsedTrace& trace) {
  Index ix = build_index(trace);
  for (const auto& [q, deliveries] : ix.deliveries_in_order) {
    for (const auto& [dseq, mid] : deliveries) {
      auto origin = ix.origin_broadcast.find(mid);
      if (origin == ix.origin_broadcast.end()) continue;
      const auto& [p, bseq] = origin->second;
      // Everything P broadcast before m.
      for (const auto& [bseq2, mid2] : ix.broadcasts_by[p]) {
        if (bseq2 >= bseq) break;
        if (!ix.familiar(q, mid2, dseq))
          return make("causal-order", Verdict::Result::Fail,
                      "message " + codec::encode(mid2) + " broadcast by " +
                          p.id + " before " + codec::encode(mid) +
                          " is not familiar to " + q.id + " at its delivery",
                      {bseq2, bseq, dseq});
      }
      // Everything familiar to P at the broadcast of m.
      for (const auto& mid2 : ix.inherited_familiar[p]) {
        if (mid2 == mid) continue;
        if (!ix.familiar(q, mid2, dseq))
          return make("causal-order", Verdict::Result::Fail,
                      "message " + codec::encode(mid2) +
                          " inherited-familiar to " + p.id +
                          " is not familiar to " + q.id + " at delivery of " +
                          codec::encode(mid),
                      {bseq, dseq});
      }
      for (const auto& [mid2, dseq2] : ix.delivered[p]) {
        if (dseq2 >= bseq || mid2 == mid) continue;
        if (!ix.familiar(q, mid2, dseq))
          return make("causal-order", Verdict::Result::Fail,
                      "message " + codec::encode(mid2) + " delivered at " +
                          p.id + " before it broadcast " + codec::encode(mid) +
                          " is not familiar to " + q.id + " at its delivery",
                      {dseq2, bseq, dseq});
      }
    }
  }
  return make("causal-order", Verdict::Result::Pass);
}

Verdict check_progress(const ParsedTrace& trace) {
  if (!trace.quiescent)
    return make("progress", Verdict::Result::Inconclusive,
                "run timed out; eventuality cannot be refuted");
  Index ix = build_index(trace);
  std::vector<ProcessId> alive;
  for (const auto& [pid, pv] : ix.procs)
    if (pv.halt_seq == kNever) alive.push_back(pid);
  for (const auto& p : alive) {
    for (const auto& [bseq, mid] : ix.broadcasts_by[p]) {
      for (const auto& q : alive) {
        if (!ix.familiar_ever(q, mid))
          return make("progress", Verdict::Result::Fail,
                      "message " + codec::encode(mid) + " from non-halting " +
                          p.id + " never became familiar to non-halting " +
                          q.id,
                      {bseq});
      }
    }
  }
  return make("progress", Verdict::Result::Pass);
}

Verdict check_receipt_agreement(const ParsedTrace& trace) {
  Index ix = build_index(trace);
  auto received = [&](const ProcessId& pid, const MessageId& m) {
    auto own = ix.received.find(pid);
    if (own != ix.received.end() && own->second.count(m)) return true;
    auto inh = ix.inherited_received.find(pid);
    return inh != ix.inherited_received.end() && inh->second.count(m) > 0;
  };
  std::map<ViewId, std::vector<std::pair<ProcessId, std::uint64_t>>>
      installers;
  for (const auto& [pid, installs] : ix.installs)
    for (const auto& inst : installs)
      installers[inst.view].emplace_back(pid, inst.seq);
  for (const auto& [pid, installs] : ix.installs) {
    for (const auto& inst : installs) {
      if (inst.gap != 0) continue;  // no constraint for gapped installs
      std::set<MessageId> low;
      if (auto own = ix.received.find(pid); own != ix.received.end())
        for (const auto& m : own->second)
          if (m.mview < inst.view) low.insert(m);
      if (auto inh = ix.inherited_received.find(pid);
          inh != ix.inherited_received.end())
        for (const auto& m : inh->second)
          if (m.mview < inst.view) low.insert(m);
      for (const auto& m : low) {
        for (const auto& [q, qseq] : installers[inst.view]) {
          if (q == pid) continue;
          if (!received(q, m))
            return make(
                "receipt-agreement", Verdict::Result::Fail,
                "message " + codec::encode(m) + " received by " + pid.id +
                    " (installed view " + std::to_string(inst.view) +
                    " with gap 0) but never received by installer " + q.id,
                {inst.seq, qseq});
        }
      }
    }
  }
  return make("receipt-agreement", Verdict::Result::Pass);
}

Verdict check_install_flush(const ParsedTrace& trace) {
  Index ix = build_index(trace);
  for (const auto& [pid, installs] : ix.installs) {
    for (const auto& inst : installs) {
      ViewId height = inst.view + inst.gap;
      if (height >= ix.members.size()) continue;  // unreconstructed view
      for (const auto& member : ix.members[height]) {
        bool found = false;
        auto chan_it = ix.chans.find({member, pid});
        if (chan_it != ix.chans.end()) {
          for (const Ev* ev : chan_it->second.consumed) {
            if (ev->kind != Kind::PacketIn || ev->seq >= inst.seq) continue;
            const Packet& pkt = ev->packet;
            switch (packet_kind(pkt)) {
              case PacketKind::Flush:
                found |= std::get<FlushPacket>(pkt.body).view == height;
                break;
              case PacketKind::Donation:
                found |= std::get<DonationPacket>(pkt.body).body.flush_height ==
                         height;
                break;
              case PacketKind::CoDonation:
                found |=
                    std::get<CoDonationPacket>(pkt.body).body.flush_height ==
                    height;
                break;
              default:
                break;
            }
            if (found) break;
          }
        }
        if (!found)
          return make("install-flush", Verdict::Result::Fail,
                      pid.id + " installed view " + std::to_string(inst.view) +
                          " (gap " + std::to_string(inst.gap) +
                          ") without flush evidence at height " +
                          std::to_string(height) + " from " + member.id,
                      {inst.seq});
      }
    }
  }
  return make("install-flush", Verdict::Result::Pass);
}

Verdict check_unique_takeup(const ParsedTrace& trace) {
  Index ix = build_index(trace);
  bool join_free = true;
  for (const auto& ch : ix.changes)
    if (ch.is_join) join_free = false;

  auto effective_receipt = [&](const ProcessId& pid, const MessageId& m) {
    auto tk = ix.takeups.find(pid);
    if (tk != ix.takeups.end() && tk->second.count(m)) return true;
    auto inh = ix.inherited_takeup.find(pid);
    return inh != ix.inherited_takeup.end() && inh->second.count(m) > 0;
  };

  for (const auto& [pid, per_message] : ix.takeups) {
    for (const auto& [mid, ups] : per_message) {
      if (ups.size() > 1)
        return make("unique-takeup", Verdict::Result::Fail,
                    "message " + codec::encode(mid) + " taken up " +
                        std::to_string(ups.size()) + " times at " + pid.id,
                    {ups[0].seq, ups[1].seq});
      const auto& up = ups.front();
      const ProcessId& sender = up.from;
      if (sender == mid.orig) continue;  // direct from the originator
      if (!effective_receipt(sender, mid))
        return make("unique-takeup", Verdict::Result::Fail,
                    "effective sender " + sender.id + " of " +
                        codec::encode(mid) + " taken up at " + pid.id +
                        " never took the message up itself",
                    {up.seq});
      // A forward is triggered by the removal of the sender's own effective
      // sender, so removal views strictly increase along the route.
      if (auto tk = ix.takeups.find(sender); tk != ix.takeups.end()) {
        auto own = tk->second.find(mid);
        if (own != tk->second.end()) {
          const ProcessId& prev = own->second.front().from;
          ViewId prev_rdv = ix.rdv(prev);
          ViewId sender_rdv = ix.rdv(sender);
          if (prev_rdv == static_cast<ViewId>(kNever))
            return make("unique-takeup", Verdict::Result::Fail,
                        sender.id + " forwarded " + codec::encode(mid) +
                            " although its effective sender " + prev.id +
                            " was never removed",
                        {up.seq});
          if (prev_rdv >= sender_rdv)
            return make("unique-takeup", Verdict::Result::Fail,
                        "removal views do not increase along the route of " +
                            codec::encode(mid) + ": " + prev.id + " then " +
                            sender.id,
                        {up.seq});
        }
      }
      if (join_free && ix.views_complete) {
        if (!ix.is_member(sender, mid.mview) || !ix.is_member(pid, mid.mview))
          return make("unique-takeup", Verdict::Result::Fail,
                      "route of " + codec::encode(mid) +
                          " leaves the message view at " + sender.id + "->" +
                          pid.id,
                      {up.seq});
      }
    }
  }
  return make("unique-takeup", Verdict::Result::Pass);
}

namespace {

// Per-process notification lookups used by the conformance check.
struct NotifyTimeline {
  std::map<ViewId, std::uint64_t> notify_seq;
  ViewId join_view = 0;
  bool aware(ViewId v, std::uint64_t before) const {
    if (v <= join_view) return true;
    auto it = notify_seq.find(v);
    return it != notify_seq.end() && it->second < before;
  }
  ViewId height(std::uint64_t before) const {
    ViewId h = join_view;
    for (const auto& [v, s] : notify_seq)
      if (s < before && v > h) h = v;
    return h;
  }
};

}  // namespace

Verdict check_model_conformance(const ParsedTrace& trace) {
  Index ix = build_index(trace);
  auto fail = [](std::string detail, std::vector<std::uint64_t> ev) {
    return make("model-conformance", Verdict::Result::Fail, std::move(detail),
                std::move(ev));
  };

  if (!ix.views_complete &&
      ix.view_problem.find("conflict") != std::string::npos)
    return fail(ix.view_problem, {});

  std::map<ProcessId, NotifyTimeline> timelines;
  for (const auto& [pid, pv] : ix.procs) {
    if (pv.events.empty()) continue;
    const Ev* first = pv.events.front();
    if (first->kind != Kind::Notify ||
        first->notification.kind != Notification::Kind::New)
      return fail("process " + pid.id +
                      " does not start with its own join notification",
                  {first->seq});
    NotifyTimeline tl;
    tl.join_view = first->view;
    ViewId expect = first->view;
    for (const Ev* ev : pv.notifies) {
      if (ev->view != expect)
        return fail("notification order broken at " + pid.id + ": view " +
                        std::to_string(ev->view) + " does not follow " +
                        std::to_string(expect - 1),
                    {ev->seq});
      tl.notify_seq[ev->view] = ev->seq;
      ++expect;
      if (ev->notification.kind == Notification::Kind::Dead) {
        for (const Ev* later : pv.events)
          if (later->seq > ev->seq && later->kind != Kind::Halt)
            return fail(
                "events at " + pid.id + " after its death notification",
                {ev->seq, later->seq});
      }
    }
    timelines[pid] = std::move(tl);
  }

  // One legal change per view.
  for (size_t i = 0; i < ix.changes.size(); ++i) {
    const auto& ch = ix.changes[i];
    const auto& prev = ix.members[i];
    if (ch.is_join) {
      if (prev.count(ch.pid))
        return fail("join of existing member " + ch.pid.id + " at view " +
                        std::to_string(i + 1),
                    {});
      if (ch.parent.valid() && !prev.count(ch.parent))
        return fail("join parent " + ch.parent.id + " not a member at view " +
                        std::to_string(i + 1),
                    {});
      for (size_t j = 0; j < i; ++j)
        if (ix.changes[j].pid == ch.pid && !ix.changes[j].is_join)
          return fail("removed process " + ch.pid.id + " rejoined", {});
    } else if (!prev.count(ch.pid)) {
      return fail("removal of non-member " + ch.pid.id + " at view " +
                      std::to_string(i + 1),
                  {});
    }
  }

  // Channel discipline.
  for (const auto& [key, chan] : ix.chans) {
    const auto& [src, tgt] = key;
    if (chan.consumed.size() > chan.queued.size())
      return fail(
          "more packets consumed than queued on " + src.id + "->" + tgt.id,
          {chan.consumed.back()->seq});
    bool discarded = false;
    for (size_t i = 0; i < chan.consumed.size(); ++i) {
      const Ev* in = chan.consumed[i];
      const Ev* out = chan.queued[i];
      if (!(in->packet == out->packet))
        return fail("channel " + src.id + "->" + tgt.id +
                        " consumed a packet out of order",
                    {out->seq, in->seq});
      if (out->seq >= in->seq)
        return fail("packet consumed before it was queued on " + src.id +
                        "->" + tgt.id,
                    {out->seq, in->seq});
      if (in->kind == Kind::Discard) {
        discarded = true;
      } else if (discarded) {
        return fail("packet processed after a discard on " + src.id + "->" +
                        tgt.id,
                    {in->seq});
      }
      if (in->kind == Kind::PacketIn) {
        auto tl = timelines.find(tgt);
        if (tl == timelines.end())
          return fail("packet processed at a process with no join record",
                      {in->seq});
        if (in->packet.piggyback_height > tl->second.height(in->seq))
          return fail(
              "packet processed below its piggyback height at " + tgt.id,
              {in->seq});
        auto rv = ix.removal_view.find(src);
        if (rv != ix.removal_view.end() &&
            tl->second.aware(rv->second, in->seq))
          return fail("packet from " + src.id + " processed at " + tgt.id +
                          " after its removal notification",
                      {in->seq});
      }
    }
  }

  // Queue-side checks: distinct targets, liveness, piggyback stamping.
  for (const auto& [pid, pv] : ix.procs) {
    auto tl_it = timelines.find(pid);
    if (tl_it == timelines.end()) continue;
    const auto& tl = tl_it->second;
    for (const Ev* ev : pv.events) {
      if (ev->kind != Kind::Queue) continue;
      std::set<ProcessId> seen;
      for (const auto& t : ev->targets)
        if (!seen.insert(t).second)
          return fail("duplicate multicast target " + t.id, {ev->seq});
      if (ev->packet.piggyback_height != tl.height(ev->seq))
        return fail(
            "piggyback height not the sender's view height at " + pid.id,
            {ev->seq});
      for (const auto& t : ev->targets) {
        auto jv = [&]() -> std::optional<ViewId> {
          if (!ix.members.empty() && ix.members.front().count(t)) return 0;
          for (size_t i = 0; i < ix.changes.size(); ++i)
            if (ix.changes[i].is_join && ix.changes[i].pid == t)
              return static_cast<ViewId>(i + 1);
          return std::nullopt;
        }();
        bool known_alive =
            ix.is_member(t, tl.join_view) || (jv && tl.aware(*jv, ev->seq));
        if (!known_alive)
          return fail("packet queued to a process not yet announced: " + t.id,
                      {ev->seq});
        auto rv = ix.removal_view.find(t);
        if (rv != ix.removal_view.end() && tl.aware(rv->second, ev->seq))
          return fail("packet queued to " + t.id +
                          " after its removal notification at " + pid.id,
                      {ev->seq});
      }
    }
  }

  // Self-channel packets are processed before the next notification.
  for (const auto& [pid, pv] : ix.procs) {
    auto chan_it = ix.chans.find({pid, pid});
    if (chan_it == ix.chans.end()) continue;
    const auto& chan = chan_it->second;
    for (const Ev* notify : pv.notifies) {
      for (size_t i = 0; i < chan.queued.size(); ++i) {
        if (chan.queued[i]->seq >= notify->seq) break;
        if (i >= chan.consumed.size() || chan.consumed[i]->seq >= notify->seq)
          return fail(
              "self-channel packet not processed before the next "
              "notification at " +
                  pid.id,
              {chan.queued[i]->seq, notify->seq});
      }
    }
  }

  // Parent/child coupling.
  for (const auto& [pid, pv] : ix.procs) {
    if (!pv.has_join_view || pv.join_view == 0) continue;
    auto par = ix.parent_of.find(pid);
    if (par == ix.parent_of.end())
      return fail("joined process " + pid.id + " has no join record", {});
    auto fs = ix.fork_seq.find(pid);
    const Ev* first = pv.events.front();
    if (fs == ix.fork_seq.end())
      return fail(
          "parent of " + pid.id + " never processed the join notification",
          {first->seq});
    const Ev* parent_notify = nullptr;
    for (const Ev* ev : ix.procs[par->second].notifies)
      if (ev->seq == fs->second) parent_notify = ev;
    if (parent_notify && parent_notify->tick != first->tick)
      return fail("fork of " + pid.id +
                      " not contemporaneous with the parent notification",
                  {fs->second, first->seq});
  }

  // Fault couplings, meaningful only for finished runs.
  if (trace.quiescent && ix.views_complete) {
    ViewId top = static_cast<ViewId>(ix.members.size() - 1);
    for (const auto& [pid, pv] : ix.procs) {
      if (!pv.has_join_view) continue;
      ViewId entitled_up_to =
          ix.rdv(pid) == static_cast<ViewId>(kNever) ? top : ix.rdv(pid);
      ViewId highest = pv.notifies.empty() ? 0 : pv.notifies.back()->view;
      if (highest < entitled_up_to && pv.halt_seq == kNever)
        return fail("non-halting " + pid.id +
                        " never dequeued its notification for view " +
                        std::to_string(highest + 1),
                    {});
      if (pv.halt_seq != kNever && ix.rdv(pid) == static_cast<ViewId>(kNever))
        return fail("halting process " + pid.id + " was never removed",
                    {pv.halt_seq});
    }
    for (const auto& [pid, rv] : ix.removal_view) {
      auto pit = ix.procs.find(pid);
      if (pit != ix.procs.end() && !pit->second.events.empty() &&
          pit->second.halt_seq == kNever)
        return fail("removed process " + pid.id + " never halted", {});
    }
  }

  return make("model-conformance", Verdict::Result::Pass);
}

namespace {

const Ev* consumption_of(const ChannelView& chan, size_t i) {
  return i < chan.consumed.size() ? chan.consumed[i] : nullptr;
}

}  // namespace

DonationOracle donation_replay_oracle(const ParsedTrace& trace) {
  Index ix = build_index(trace);
  DonationOracle oracle;
  for (size_t i = 0; i < ix.changes.size(); ++i) {
    if (ix.changes[i].is_join) {
      oracle.has_join = true;
      oracle.crit_view = static_cast<ViewId>(i + 1);
      oracle.joiner = ix.changes[i].pid;
      oracle.parent = ix.changes[i].parent;
      break;
    }
  }
  if (!oracle.has_join) return oracle;
  const ProcessId& g = oracle.joiner;
  const ProcessId& d = oracle.parent;

  auto crit_seq = [&](const ProcessId& pid) -> std::uint64_t {
    auto it = ix.procs.find(pid);
    if (it == ix.procs.end()) return kNever;
    for (const Ev* ev : it->second.notifies)
      if (ev->view == oracle.crit_view) return ev->seq;
    return kNever;
  };
  std::uint64_t crit_d = crit_seq(d);
  std::uint64_t crit_g = crit_seq(g);  // the joiner's birth

  // Untimely with respect to the critical view change: queued before the
  // source's notification, never consumed or consumed after the target's.
  auto untimely = [&](const Ev* queued, const Ev* consumed,
                      std::uint64_t src_crit, std::uint64_t tgt_crit) {
    if (src_crit == kNever || queued->seq >= src_crit) return false;
    if (!consumed || consumed->kind == Kind::Discard) return true;
    return tgt_crit == kNever || consumed->seq > tgt_crit;
  };

  if (oracle.crit_view == 0 || oracle.crit_view > ix.members.size())
    return oracle;
  for (const auto& p : ix.members[oracle.crit_view - 1]) {
    DonationExpectation exp;
    exp.donor = p;
    std::uint64_t crit_p = crit_seq(p);

    // Donation side: untimely message packets and forwarded-ack packets on
    // the donor->parent channel, in queuing order.
    if (auto chan_pd = ix.chans.find({p, d}); chan_pd != ix.chans.end()) {
      const auto& chan = chan_pd->second;
      for (size_t i = 0; i < chan.queued.size(); ++i) {
        const Ev* q = chan.queued[i];
        if (!untimely(q, consumption_of(chan, i), crit_p, crit_d)) continue;
        if (is_msg(q->packet)) {
          exp.donation_subs.emplace_back(true, message_id(msg_of(q->packet)));
        } else if (packet_kind(q->packet) == PacketKind::Ack) {
          const MessageId& id = std::get<AckPacket>(q->packet.body).id;
          if (id.orig != d) exp.donation_subs.emplace_back(false, id);
        }
      }
    }

    std::uint64_t donation_in_seq = kNever;
    if (auto gproc = ix.procs.find(g); gproc != ix.procs.end()) {
      for (const Ev* ev : gproc->second.events) {
        if (ev->kind == Kind::PacketIn && ev->peer == p &&
            packet_kind(ev->packet) == PacketKind::Donation) {
          exp.donation_processed = true;
          donation_in_seq = ev->seq;
          for (const auto& sub : ev->subs)
            exp.actual_donation_subs.emplace_back(sub.is_message, sub.id);
          break;
        }
      }
    }

    // Co-donation side: untimely forwarded messages and acks on the
    // parent->donor channel, plus the joiner's own post-critical
    // pre-donation self-channel messages, merged in queuing order.
    std::vector<std::pair<std::uint64_t, std::pair<bool, MessageId>>> merged;
    if (auto chan_dp = ix.chans.find({d, p}); chan_dp != ix.chans.end()) {
      const auto& chan = chan_dp->second;
      for (size_t i = 0; i < chan.queued.size(); ++i) {
        const Ev* q = chan.queued[i];
        if (!untimely(q, consumption_of(chan, i), crit_d, crit_p)) continue;
        if (is_msg(q->packet)) {
          const StampedMessage& m = msg_of(q->packet);
          if (m.orig != d)
            merged.emplace_back(q->seq, std::make_pair(true, message_id(m)));
        } else if (packet_kind(q->packet) == PacketKind::Ack) {
          merged.emplace_back(
              q->seq,
              std::make_pair(false, std::get<AckPacket>(q->packet.body).id));
        }
      }
    }
    if (auto chan_gg = ix.chans.find({g, g});
        chan_gg != ix.chans.end() && crit_g != kNever) {
      for (const Ev* q : chan_gg->second.queued) {
        if (q->seq <= crit_g || q->seq >= donation_in_seq) continue;
        if (is_msg(q->packet))
          merged.emplace_back(q->seq,
                              std::make_pair(true, message_id(msg_of(q->packet))));
      }
    }
    std::sort(merged.begin(), merged.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [seq, sub] : merged) exp.codonation_subs.push_back(sub);

    if (auto pproc = ix.procs.find(p); pproc != ix.procs.end()) {
      for (const Ev* ev : pproc->second.events) {
        if (ev->kind == Kind::PacketIn && ev->peer == g &&
            packet_kind(ev->packet) == PacketKind::CoDonation) {
          exp.codonation_processed = true;
          for (const auto& sub : ev->subs)
            exp.actual_codonation_subs.emplace_back(sub.is_message, sub.id);
          break;
        }
      }
    }
    oracle.donors.push_back(std::move(exp));
  }
  return oracle;
}

Verdict check_donation_replay(const ParsedTrace& trace) {
  DonationOracle oracle = donation_replay_oracle(trace);
  if (!oracle.has_join)
    return make("donation-replay", Verdict::Result::Pass, "no joins");
  auto render_subs = [](const std::vector<std::pair<bool, MessageId>>& subs) {
    std::string out = "[";
    for (const auto& [is_message, id] : subs) {
      out += is_message ? "m" : "a";
      out += codec::encode(id);
      out += ";";
    }
    return out + "]";
  };
  for (const auto& exp : oracle.donors) {
    if (exp.donation_processed &&
        exp.donation_subs != exp.actual_donation_subs)
      return make("donation-replay", Verdict::Result::Fail,
                  "replayed sub-transactions at " + oracle.joiner.id +
                      " for the donation from " + exp.donor.id +
                      " diverge from the untimely packets: expected " +
                      render_subs(exp.donation_subs) + " got " +
                      render_subs(exp.actual_donation_subs),
                  {});
    if (exp.codonation_processed &&
        exp.codonation_subs != exp.actual_codonation_subs)
      return make("donation-replay", Verdict::Result::Fail,
                  "replayed sub-transactions at " + exp.donor.id +
                      " for the co-donation from " + oracle.joiner.id +
                      " diverge from the untimely packets: expected " +
                      render_subs(exp.codonation_subs) + " got " +
                      render_subs(exp.actual_codonation_subs),
                  {});
  }
  return make("donation-replay", Verdict::Result::Pass);
}

Verdict check_counting_lockstep(const ParsedTrace& trace) {
  Index ix = build_index(trace);
  if (ix.members.empty())
    return make("counting-lockstep", Verdict::Result::Pass);
  const auto& originals = ix.members.front();
  // Position of each message multicast among all of the sender's multicasts.
  std::map<ProcessId, std::map<std::uint64_t, std::uint64_t>> msg_index;
  for (const auto& [pid, pv] : ix.procs) {
    std::uint64_t n = 0;
    for (const Ev* ev : pv.events)
      if (ev->kind == Kind::Queue && is_msg(ev->packet))
        msg_index[pid][ev->seq] = ++n;
  }
  for (const auto& [key, chan] : ix.chans) {
    const auto& [src, tgt] = key;
    bool checked_pair =
        src == tgt || (originals.count(src) && originals.count(tgt));
    if (!checked_pair) continue;
    std::uint64_t received = 0;
    for (size_t i = 0; i < chan.consumed.size(); ++i) {
      const Ev* in = chan.consumed[i];
      if (in->kind != Kind::PacketIn || !is_msg(in->packet)) continue;
      ++received;
      if (i >= chan.queued.size()) break;  // conformance reports this
      auto idx = msg_index[src].find(chan.queued[i]->seq);
      if (idx == msg_index[src].end() || idx->second != received)
        return make("counting-lockstep", Verdict::Result::Fail,
                    "receive counter at " + tgt.id + " for " + src.id +
                        " diverges from the sender's message index",
                    {in->seq});
    }
  }
  return make("counting-lockstep", Verdict::Result::Pass);
}

Verdict check_flush_lockstep(const ParsedTrace& trace) {
  Index ix = build_index(trace);
  if (ix.members.empty())
    return make("flush-lockstep", Verdict::Result::Pass);
  const auto& originals = ix.members.front();
  for (const auto& [key, chan] : ix.chans) {
    const auto& [src, tgt] = key;
    bool checked_pair =
        src == tgt || (originals.count(src) && originals.count(tgt));
    if (!checked_pair) continue;
    std::optional<ViewId> last_flush, last_ghost;
    for (const Ev* in : chan.consumed) {
      if (in->kind != Kind::PacketIn) continue;
      if (packet_kind(in->packet) == PacketKind::Flush) {
        ViewId v = std::get<FlushPacket>(in->packet.body).view;
        if (last_flush && v <= *last_flush)
          return make("flush-lockstep", Verdict::Result::Fail,
                      "flush heights from " + src.id + " at " + tgt.id +
                          " are not strictly increasing",
                      {in->seq});
        last_flush = v;
      } else if (packet_kind(in->packet) == PacketKind::Ghost) {
        ViewId v = std::get<GhostPacket>(in->packet.body).view;
        if (last_ghost && v <= *last_ghost)
          return make("flush-lockstep", Verdict::Result::Fail,
                      "ghost heights from " + src.id + " at " + tgt.id +
                          " are not strictly increasing",
                      {in->seq});
        last_ghost = v;
      }
    }
  }
  return make("flush-lockstep", Verdict::Result::Pass);
}

Verdict check_gapless_delivery(const ParsedTrace& trace) {
  Index ix = build_index(trace);
  std::map<std::tuple<ProcessId, ViewId, ProcessId>, std::uint64_t> next;
  for (const auto& [pid, counts] : ix.inherited_delivery_count)
    for (const auto& [key, count] : counts)
      next[{pid, key.first, key.second}] = count;
  for (const auto& [pid, deliveries] : ix.deliveries_in_order) {
    for (const auto& [seq, mid] : deliveries) {
      auto stamp = mid.mvt.find(mid.orig);
      if (stamp == mid.mvt.end())
        return make("gapless-delivery", Verdict::Result::Fail,
                    "delivered message lacks its originator coordinate",
                    {seq});
      auto key = std::make_tuple(pid, mid.mview, mid.orig);
      std::uint64_t expect = next[key] + 1;
      if (stamp->second != expect)
        return make("gapless-delivery", Verdict::Result::Fail,
                    pid.id + " delivered message " +
                        std::to_string(stamp->second) + " from " +
                        mid.orig.id + " in view " + std::to_string(mid.mview) +
                        " but expected " + std::to_string(expect),
                    {seq});
      next[key] = expect;
    }
  }
  return make("gapless-delivery", Verdict::Result::Pass);
}

Verdict check_view_agreement(const ParsedTrace& trace) {
  Index ix = build_index(trace);
  for (ViewId v = 1; v < ix.members.size(); ++v) {
    std::optional<std::set<MessageId>> reference;
    ProcessId ref_pid;
    for (const auto& [pid, installs] : ix.installs) {
      for (const auto& inst : installs) {
        if (inst.view != v) continue;
        std::set<MessageId> low;
        for (const auto& [mid, seq] : ix.delivered[pid])
          if (mid.mview == v - 1) low.insert(mid);
        for (const auto& mid : ix.inherited_familiar[pid])
          if (mid.mview == v - 1) low.insert(mid);
        if (!reference) {
          reference = std::move(low);
          ref_pid = pid;
        } else if (*reference != low) {
          return make("view-agreement", Verdict::Result::Fail,
                      "installers " + ref_pid.id + " and " + pid.id +
                          " of view " + std::to_string(v) +
                          " delivered different view-" +
                          std::to_string(v - 1) + " message sets",
                      {inst.seq}, false);
        }
      }
    }
  }
  return make("view-agreement", Verdict::Result::Pass, "", {}, false);
}

CheckReport run_all_checks(const ParsedTrace& trace) {
  CheckReport report;
  report.verdicts.push_back(check_model_conformance(trace));
  report.verdicts.push_back(check_causal_order(trace));
  report.verdicts.push_back(check_progress(trace));
  report.verdicts.push_back(check_receipt_agreement(trace));
  report.verdicts.push_back(check_install_flush(trace));
  report.verdicts.push_back(check_unique_takeup(trace));
  report.verdicts.push_back(check_donation_replay(trace));
  report.verdicts.push_back(check_counting_lockstep(trace));
  report.verdicts.push_back(check_flush_lockstep(trace));
  report.verdicts.push_back(check_gapless_delivery(trace));
  report.verdicts.push_back(check_view_agreement(trace));

  std::uint64_t noop = 0, discards = 0;
  for (const auto& ev : trace.events) {
    if (ev.kind == Kind::Discard) ++discards;
    if (ev.kind == Kind::PacketIn) {
      if (ev.noop_ack) ++noop;
      for (const auto& sub : ev.subs)
        if (sub.noop) ++noop;
    }
  }
  report.verdicts.push_back(make("redundant-acks", Verdict::Result::Info,
                                 std::to_string(noop) +
                                     " acks found no wait record",
                                 {}, false));
  report.verdicts.push_back(make("discarded-packets", Verdict::Result::Info,
                                 std::to_string(discards) +
                                     " packets discarded from removed senders",
                                 {}, false));
  return report;
}

}  // namespace cbcast
