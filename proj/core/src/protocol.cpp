#include "cbcast/protocol.hpp"

#include <algorithm>

namespace cbcast::prot {

namespace {

void multicast(ProcessState& st, TransactionSink& sink, Packet pkt) {
  sink.emit(SideEffect{std::move(pkt), st.contact_set, true});
}

void unicast(ProcessState& st, TransactionSink& sink, Packet pkt,
             const ProcessId& target) {
  (void)st;
  sink.emit(SideEffect{std::move(pkt), {target}, false});
}

// Drops rem's entry from every instability set; records that stabilize are
// removed without triggering CheckFlush (the caller does that once).
void strip_instability(std::vector<WaitRecord>& records, const ProcessId& rem) {
  for (auto& rec : records) rec.iset.erase(rem);
  std::erase_if(records, [](const WaitRecord& r) { return r.iset.empty(); });
}

// A process never holds both a bcast and a fwd record for the same id; the
// duplicate filter keeps the originator's own message out of FwdWaitSet.
WaitRecord* find_record(ProcessState& st, const MessageId& id, bool* in_fwd) {
  WaitRecord* found = nullptr;
  for (auto& rec : st.bcast_wait_set) {
    if (message_id(rec.msg) == id) {
      found = &rec;
      *in_fwd = false;
    }
  }
  for (auto& rec : st.fwd_wait_set) {
    if (message_id(rec.msg) == id) {
      if (found) throw ProtocolViolation("wait record present in both sets");
      found = &rec;
      *in_fwd = true;
    }
  }
  return found;
}

void erase_record(std::vector<WaitRecord>& records, const MessageId& id) {
  std::erase_if(records, [&](const WaitRecord& r) {
    return message_id(r.msg) == id;
  });
}

// Deep snapshot of the whole wait set, bcast records first.
std::vector<WaitRecord> collect_wait_set(const ProcessState& st) {
  std::vector<WaitRecord> out = st.bcast_wait_set;
  out.insert(out.end(), st.fwd_wait_set.begin(), st.fwd_wait_set.end());
  return out;
}

struct UntEntry {
  bool from_peer_set = false;  // true: record came from the peer's snapshot
  std::uint64_t height_a = 0;
  std::uint64_t height_b = 0;
  StampedMessage msg;
  CounterPair index;
};

void sort_unt(std::vector<UntEntry>& unt) {
  std::stable_sort(unt.begin(), unt.end(),
                   [](const UntEntry& a, const UntEntry& b) {
                     if (a.height_a != b.height_a)
                       return a.height_a < b.height_a;
                     return a.height_b < b.height_b;
                   });
}

}  // namespace

void start(ProcessState& st, const std::set<ProcessId>& roster,
           const ProcessId& pid, Ulp& ulp, TransactionSink& sink) {
  if (!roster.count(pid))
    throw ConfigError("prot_start: pid not in roster");
  ulp.ground_state();
  st = ProcessState{};
  st.self_id = pid;
  st.mset = roster;
  st.live_set = roster;
  st.contact_set = roster;
  for (const auto& id : roster) {
    st.vt[id] = 0;
    st.fwd_queue[id];
    st.mpkt_in[id] = CounterPair{};
    st.ghost[id] = 0;
    st.flush[id] = 0;
    ulp.apply_join(id);
  }
  sink.launch_main();
}

void broadcast(ProcessState& st, std::string payload, Ulp&,
               TransactionSink& sink) {
  if (st.v_gap > 0) {
    st.launch_queue.push_back(std::move(payload));
    return;
  }
  st.mpkt_out.b += 1;
  VectorTime stamp = st.vt;
  stamp[st.self_id] =
      st.vt.at(st.self_id) + st.mpkt_out.b - st.mpkt_in.at(st.self_id).b;
  StampedMessage msg{std::move(payload), st.self_id, st.cur_view,
                     std::move(stamp)};
  multicast(st, sink, Packet{MsgPacket{msg}, st.view_height()});
  st.bcast_wait_set.push_back(
      WaitRecord{std::move(msg), st.mpkt_out, st.mpkt_in, WaitKind::Bcast});
}

void run(ProcessState& st, const ProcessId& pid, Ulp&, TransactionSink& sink) {
  st.v_gap += 1;
  st.pend_view_queue.push_back({PendingView::Kind::Join, pid});
  st.live_set.insert(pid);
  st.contact_set = {pid};
  st.fwd_queue[pid];
  st.bcast_wait_set.clear();
  for (auto& rec : st.fwd_wait_set) rec.index.b = 0;
  st.launch_queue.clear();
  st.flush_height = st.ghost_height;
  st.ghost[pid] = st.ghost_height;
  st.flush[pid] = st.ghost_height;
  st.mpkt_out.b = 0;
  st.mpkt_in[pid] = st.mpkt_out;
  st.self_id = pid;
  check_flush(st, sink);
}

void remove(ProcessState& st, const ProcessId& rem, Ulp&,
            TransactionSink& sink) {
  if (!st.live_set.count(rem))
    throw ProtocolViolation("prot_remove: " + rem.id + " is not live");
  st.v_gap += 1;
  st.pend_view_queue.push_back({PendingView::Kind::Remove, rem});
  st.live_set.erase(rem);
  st.contact_set.erase(rem);
  strip_instability(st.bcast_wait_set, rem);
  strip_instability(st.fwd_wait_set, rem);
  st.mpkt_in.erase(rem);
  auto& queue = st.fwd_queue.at(rem);
  while (!queue.empty()) {
    StampedMessage msg = std::move(queue.front());
    queue.pop_front();
    st.mpkt_out.f += 1;
    CounterPair index = st.mpkt_out;
    auto iset = st.mpkt_in;
    multicast(st, sink, Packet{MsgPacket{msg}, st.view_height()});
    st.fwd_wait_set.push_back(
        WaitRecord{std::move(msg), index, std::move(iset), WaitKind::Fwd});
  }
  st.fwd_queue.erase(rem);
  st.ghost.erase(rem);
  st.flush.erase(rem);
  check_flush(st, sink);
}

void join(ProcessState& st, const ProcessId& jn, const ProcessId& parent,
          Ulp&, TransactionSink& sink) {
  if (!st.live_set.count(parent))
    throw ProtocolViolation("prot_join: parent " + parent.id + " is not live");
  st.v_gap += 1;
  st.pend_view_queue.push_back({PendingView::Kind::Join, jn});
  st.live_set.insert(jn);
  st.contact_set.insert(jn);
  st.fwd_queue[jn];
  for (auto* records : {&st.bcast_wait_set, &st.fwd_wait_set}) {
    for (auto& rec : *records) {
      auto it = rec.iset.find(parent);
      if (it != rec.iset.end())
        rec.iset[jn] = CounterPair{0, it->second.f};
    }
  }
  st.ghost[jn] = st.ghost.at(parent);
  st.flush[jn] = st.ghost.at(parent);
  st.mpkt_in[jn] = CounterPair{0, st.mpkt_in.at(parent).f};
  DonationBody donation{collect_wait_set(st), st.mpkt_in, st.ghost_height,
                        st.flush_height};
  unicast(st, sink, Packet{DonationPacket{std::move(donation)},
                           st.view_height()},
          jn);
  check_flush(st, sink);
}

void packet(ProcessState& st, const Packet& pkt, const ProcessId& sender,
            Ulp& ulp, TransactionSink& sink) {
  switch (packet_kind(pkt)) {
    case PacketKind::Msg:
      receive_message(st, std::get<MsgPacket>(pkt.body).msg, sender, ulp,
                      sink);
      break;
    case PacketKind::Ack:
      receive_ack(st, std::get<AckPacket>(pkt.body).id, sender, ulp, sink);
      break;
    case PacketKind::Ghost:
      receive_ghost(st, std::get<GhostPacket>(pkt.body).view, sender);
      break;
    case PacketKind::Flush:
      receive_flush(st, std::get<FlushPacket>(pkt.body).view, sender, ulp,
                    sink);
      break;
    case PacketKind::Donation:
      receive_donation(st, std::get<DonationPacket>(pkt.body).body, sender,
                       ulp, sink);
      break;
    case PacketKind::CoDonation:
      receive_codonation(st, std::get<CoDonationPacket>(pkt.body).body, sender,
                         ulp, sink);
      break;
  }
}

void receive_message(ProcessState& st, const StampedMessage& msg,
                     const ProcessId& sender, Ulp& ulp,
                     TransactionSink& sink) {
  MessageId id = message_id(msg);
  unicast(st, sink, Packet{AckPacket{id}, st.view_height()}, sender);
  auto in = st.mpkt_in.find(sender);
  if (in == st.mpkt_in.end())
    throw ProtocolViolation("message from non-live sender " + sender.id);
  if (msg.orig == sender)
    in->second.b += 1;
  else
    in->second.f += 1;

  if (msg.mview < st.cur_view) return;  // obsolete messages are duplicates
  if (msg.mview == st.cur_view) {
    auto vt_it = st.vt.find(msg.orig);
    if (vt_it == st.vt.end())
      throw ProtocolViolation("originator " + msg.orig.id +
                              " outside current view");
    auto stamp = id.mvt.find(msg.orig);
    if (stamp == id.mvt.end())
      throw ProtocolViolation("message stamp lacks originator coordinate");
    if (vt_it->second >= stamp->second) return;  // already delivered
  }
  if (st.receive_set.count(id)) return;  // already received

  st.receive_set.emplace(id, msg);
  st.fwd_queue.at(sender).push_back(msg);
  sink.note_takeup(id);
  scan(st, ulp, sink);
}

void receive_ack(ProcessState& st, const MessageId& id,
                 const ProcessId& sender, Ulp&, TransactionSink& sink) {
  bool in_fwd = false;
  WaitRecord* rec = find_record(st, id, &in_fwd);
  if (!rec) {
    // Duplicate receipts generate acks for records that may already be
    // stable; the guarded no-op is deliberate.
    sink.note_noop_ack(id);
    return;
  }
  rec->iset.erase(sender);
  if (rec->iset.empty()) {
    erase_record(in_fwd ? st.fwd_wait_set : st.bcast_wait_set, id);
    check_flush(st, sink);
  }
}

void receive_ghost(ProcessState& st, ViewId view, const ProcessId& sender) {
  auto it = st.ghost.find(sender);
  if (it == st.ghost.end())
    throw ProtocolViolation("ghost from non-live sender " + sender.id);
  it->second = view;
}

void receive_flush(ProcessState& st, ViewId view, const ProcessId& sender,
                   Ulp& ulp, TransactionSink& sink) {
  auto it = st.flush.find(sender);
  if (it == st.flush.end())
    throw ProtocolViolation("flush from non-live sender " + sender.id);
  it->second = view;
  try_to_install(st, ulp, sink);
}

void receive_donation(ProcessState& st, const DonationBody& body,
                      const ProcessId& sender, Ulp& ulp,
                      TransactionSink& sink) {
  if (!st.live_set.count(sender))
    throw ProtocolViolation("donation from non-live sender " + sender.id);
  st.contact_set.insert(sender);
  DonationBody co{collect_wait_set(st), st.mpkt_in, st.ghost_height,
                  st.flush_height};
  unicast(st, sink,
          Packet{CoDonationPacket{std::move(co)}, st.view_height()}, sender);

  // Untimely set. Records from the donated snapshot sort by the donor's view
  // of our receive counter; our own records sort by their send index. Exact
  // cross-set ties keep peer-set records first.
  std::vector<UntEntry> unt;
  for (const auto& rec : body.wait_set) {
    auto it = rec.iset.find(st.self_id);
    if (it != rec.iset.end())
      unt.push_back({true, counter_total(it->second),
                     counter_total(rec.index), rec.msg, rec.index});
  }
  for (const auto* records : {&st.bcast_wait_set, &st.fwd_wait_set}) {
    for (const auto& rec : *records) {
      if (rec.iset.count(sender))
        unt.push_back(
            {false, counter_total(rec.index), 0, rec.msg, rec.index});
    }
  }
  sort_unt(unt);

  for (const auto& entry : unt) {
    if (entry.from_peer_set) {
      if (counter_total(entry.index) >
          counter_total(st.mpkt_in.at(sender))) {
        // An untimely message packet from the sender to the parent; process
        // its clone now.
        sink.note_sub(true, message_id(entry.msg));
        receive_message(st, entry.msg, sender, ulp, sink);
      }
    } else {
      if (counter_total(entry.index) <=
          counter_total(body.mpkt_in.at(st.self_id))) {
        // A message packet from us whose acknowledgement was untimely.
        sink.note_sub(false, message_id(entry.msg));
        receive_ack(st, message_id(entry.msg), sender, ulp, sink);
      }
    }
  }

  st.ghost.at(sender) = body.ghost_height;
  st.flush.at(sender) = body.flush_height;
}

void receive_codonation(ProcessState& st, const DonationBody& body,
                        const ProcessId& sender, Ulp& ulp,
                        TransactionSink& sink) {
  if (!st.live_set.count(sender))
    throw ProtocolViolation("co-donation from non-live sender " + sender.id);

  // Mirrored roles: our own records sort by send index, the joiner's records
  // by its inherited view of our counter. Own records first on exact ties.
  std::vector<UntEntry> unt;
  for (const auto* records : {&st.bcast_wait_set, &st.fwd_wait_set}) {
    for (const auto& rec : *records) {
      if (rec.iset.count(sender))
        unt.push_back(
            {false, counter_total(rec.index), 0, rec.msg, rec.index});
    }
  }
  for (const auto& rec : body.wait_set) {
    auto it = rec.iset.find(st.self_id);
    if (it != rec.iset.end())
      unt.push_back({true, counter_total(it->second),
                     counter_total(rec.index), rec.msg, rec.index});
  }
  sort_unt(unt);

  for (const auto& entry : unt) {
    if (entry.from_peer_set) {
      if (counter_total(entry.index) >
          counter_total(st.mpkt_in.at(sender))) {
        // Either an untimely forwarded message from the parent or a
        // post-critical forwarded message from the sender.
        sink.note_sub(true, message_id(entry.msg));
        receive_message(st, entry.msg, sender, ulp, sink);
      }
    } else {
      if (counter_total(entry.index) <=
          counter_total(body.mpkt_in.at(st.self_id))) {
        // A timely message from us to the parent whose ack was untimely.
        sink.note_sub(false, message_id(entry.msg));
        receive_ack(st, message_id(entry.msg), sender, ulp, sink);
      }
    }
  }

  st.ghost.at(sender) = body.ghost_height;
  st.flush.at(sender) = body.flush_height;
  try_to_install(st, ulp, sink);
}

void check_flush(ProcessState& st, TransactionSink& sink) {
  if (!st.fwd_wait_set.empty()) return;  // unstable forwarded messages
  if (st.ghost_height < st.view_height()) {
    st.ghost_height = st.view_height();
    multicast(st, sink, Packet{GhostPacket{st.ghost_height},
                               st.view_height()});
  }
  if (!st.bcast_wait_set.empty()) return;  // unstable original messages
  if (st.flush_height < st.view_height()) {
    st.flush_height = st.view_height();
    multicast(st, sink, Packet{FlushPacket{st.flush_height},
                               st.view_height()});
  }
}

void try_to_install(ProcessState& st, Ulp& ulp, TransactionSink& sink) {
  for (const auto& pid : st.live_set) {
    if (st.flush.at(pid) < st.view_height()) return;  // not all flushed
  }
  while (st.v_gap > 0) {
    // Messages of the view being left are obsolete.
    std::erase_if(st.receive_set, [&](const auto& kv) {
      return kv.first.mview == st.cur_view;
    });
    for (auto& [pid, queue] : st.fwd_queue) {
      std::erase_if(queue, [&](const StampedMessage& m) {
        return m.mview == st.cur_view;
      });
    }
    st.cur_view += 1;
    st.v_gap -= 1;
    if (st.pend_view_queue.empty())
      throw ProtocolViolation("view gap without pending view change");
    PendingView pending = st.pend_view_queue.front();
    st.pend_view_queue.pop_front();
    if (pending.kind == PendingView::Kind::Join) {
      st.mset.insert(pending.pid);
      ulp.apply_join(pending.pid);
      if (pending.pid == st.self_id) sink.launch_main();
    } else {
      st.mset.erase(pending.pid);
      ulp.apply_removal(pending.pid);
    }
    st.vt.clear();
    for (const auto& pid : st.mset) st.vt[pid] = 0;
    sink.note_install(st.cur_view, st.v_gap);
    scan(st, ulp, sink);
  }
  while (!st.launch_queue.empty()) {
    std::string payload = std::move(st.launch_queue.front());
    st.launch_queue.pop_front();
    broadcast(st, std::move(payload), ulp, sink);
  }
}

void scan(ProcessState& st, Ulp& ulp, TransactionSink& sink) {
  bool delivered = true;
  while (delivered) {
    delivered = false;
    std::vector<MessageId> pass;
    pass.reserve(st.receive_set.size());
    for (const auto& kv : st.receive_set) pass.push_back(kv.first);
    for (const auto& id : pass) {
      auto it = st.receive_set.find(id);
      if (it == st.receive_set.end()) continue;
      const StampedMessage& msg = it->second;
      if (msg.mview != st.cur_view) continue;
      auto vt_it = st.vt.find(msg.orig);
      if (vt_it == st.vt.end())
        throw ProtocolViolation("current-view message from non-member");
      auto stamp = id.mvt.find(msg.orig);
      if (stamp == id.mvt.end() || stamp->second != vt_it->second + 1)
        continue;  // not the next expected message from its originator
      bool deps_delivered = true;
      for (const auto& pid : st.mset) {
        if (pid == msg.orig) continue;
        auto dep = id.mvt.find(pid);
        if (dep != id.mvt.end() && dep->second > st.vt.at(pid)) {
          deps_delivered = false;
          break;
        }
      }
      if (!deps_delivered) continue;
      vt_it->second += 1;
      std::string payload = msg.payload;
      ProcessId originator = msg.orig;
      st.receive_set.erase(it);
      sink.note_deliver(id, payload);
      ulp.apply_message(payload, originator);
      delivered = true;
    }
  }
}

}  // namespace cbcast::prot
