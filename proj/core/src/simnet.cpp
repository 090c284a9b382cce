#include "cbcast/simnet.hpp"

#include <algorithm>

#include "cbcast/encoding.hpp"
#include "cbcast/rng.hpp"

namespace cbcast {

namespace {

enum class TriggerClass {
  Start,
  Request,
  Run,
  Join,
  Remove,
  PktMsg,
  PktAck,
  PktGhost,
  PktFlush,
  PktDonation,
  PktCoDonation
};

struct TxRecord {
  std::vector<PacketKind> effects;
  std::vector<bool> multicast;
  int installs = 0;
  int subs = 0;
};

std::string hex16(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

class Simulator {
 public:
  Simulator(const Scenario& sc, const SimOptions& opt)
      : scenario_(sc),
        seed_(opt.seed.value_or(sc.seed)),
        max_ticks_(opt.max_ticks.value_or(sc.max_ticks)),
        launch_delay_(opt.main_launch_delay),
        rng_(seed_),
        gms_(std::set<ProcessId>(sc.roster.begin(), sc.roster.end())) {
    for (const auto& d : sc.script) {
      if (d.kind == Directive::Kind::Broadcast) {
        scripts_[d.pid].steps.push_back({d.tick, std::nullopt, d.payload});
      } else if (d.kind == Directive::Kind::DropPackets) {
        drop_rules_.push_back(d);
      } else if (d.kind == Directive::Kind::DropNotification) {
        gms_.mark_dropped(d.pid, d.view);
      } else {
        timed_.push_back(d);
      }
    }
    std::stable_sort(timed_.begin(), timed_.end(),
                     [](const Directive& a, const Directive& b) {
                       return a.tick < b.tick;
                     });
  }

  SimResult run();

 private:
  struct Proc {
    bool instantiated = false;
    bool halted = false;
    bool main_launched = false;
    std::uint64_t main_ready_tick = 0;
    ProcessState st;
    DeliveryLog log;
    MainScript script;
    std::deque<std::string> requests;
    std::set<ProcessId> removal_known;
    std::set<MessageId> taken_up;
    // Shadows for the monotonicity assertions.
    bool shadows_valid = false;
    std::map<ProcessId, ViewId> prev_ghost, prev_flush;
    ViewId prev_gh = 0, prev_fh = 0;
  };

  struct Channel {
    std::deque<Packet> queue;
    std::uint64_t queued = 0;  // 1-based ordinal of the last queued packet
  };

  struct Trigger {
    enum class Kind { Packet, Notify, Request };
    Kind kind = Kind::Packet;
    ProcessId proc;
    ProcessId from;  // Packet only
  };

  class Sink;
  class ProcUlp;

  void start_all();
  void apply_directives();
  void grants();
  void discard_sweep();
  std::vector<Trigger> collect_triggers();
  std::optional<std::uint64_t> next_event_tick() const;
  void execute(const Trigger& tr);
  void execute_notify(Proc& p, const ProcessId& pid);
  void run_child(const ProcessId& child, ViewId view, const Proc& parent);
  void halt_process(const ProcessId& pid, bool emit_event);

  void begin_tx(TraceEvent trigger_event);
  void begin_continuation();
  void tx_event(TraceEvent ev);
  void flush_tx();
  void route(const ProcessId& from, const SideEffect& effect);

  void check_omnibus(Proc& p, ViewId expected_height);
  void verify_shape(TriggerClass cls, const TxRecord& rec,
                    const ProcessId& at);
  [[noreturn]] void violation(const std::string& what, const ProcessId& at);

  const Scenario& scenario_;
  std::uint64_t seed_;
  std::uint64_t max_ticks_;
  std::uint64_t launch_delay_;
  Xoshiro256 rng_;
  GmsOracle gms_;

  std::map<ProcessId, Proc> procs_;
  std::map<std::pair<ProcessId, ProcessId>, Channel> channels_;
  std::map<ProcessId, std::uint64_t> planned_halts_;
  std::map<ProcessId, MainScript> scripts_;
  std::vector<Directive> drop_rules_;
  std::vector<Directive> timed_;
  std::size_t next_timed_ = 0;

  std::uint64_t tick_ = 0;
  std::uint64_t last_event_tick_ = 0;
  std::uint64_t next_seq_ = 1;
  std::uint64_t event_count_ = 0;
  std::string trace_;
  std::vector<TraceEvent> tx_buffer_;
  bool tx_has_trigger_ = false;
  TxRecord tx_record_;
  std::uint64_t discards_ = 0;
  std::uint64_t noop_acks_ = 0;
};

// Routes side effects and bookkeeping notes from one transaction into the
// trace and the channel state.
class Simulator::Sink : public TransactionSink {
 public:
  Sink(Simulator& sim, Proc& proc, ProcessId pid)
      : sim_(sim), proc_(proc), pid_(std::move(pid)) {}

  void emit(SideEffect effect) override {
    for (const auto& target : effect.targets) {
      if (!proc_.st.live_set.count(target))
        sim_.violation("packet queued to non-live target " + target.id, pid_);
    }
    if (effect.packet.piggyback_height != proc_.st.view_height())
      sim_.violation("piggyback height does not match view height", pid_);
    TraceEvent ev;
    ev.process = pid_;
    ev.kind = TraceEvent::Kind::Queue;
    ev.targets.assign(effect.targets.begin(), effect.targets.end());
    ev.packet = effect.packet;
    sim_.tx_event(std::move(ev));
    sim_.tx_record_.effects.push_back(packet_kind(effect.packet));
    sim_.tx_record_.multicast.push_back(effect.multicast);
    sim_.route(pid_, effect);
  }

  void launch_main() override {
    proc_.main_launched = true;
    proc_.main_ready_tick = sim_.tick_ + sim_.launch_delay_;
  }

  void note_install(ViewId view, std::uint64_t gap) override {
    TraceEvent ev;
    ev.process = pid_;
    ev.kind = TraceEvent::Kind::Install;
    ev.view = view;
    ev.gap = gap;
    sim_.tx_event(std::move(ev));
    sim_.tx_record_.installs += 1;
  }

  void note_deliver(const MessageId& id, const std::string& payload) override {
    TraceEvent ev;
    ev.process = pid_;
    ev.kind = TraceEvent::Kind::Deliver;
    ev.mid = id;
    ev.payload = payload;
    sim_.tx_event(std::move(ev));
  }

  void note_takeup(const MessageId& id) override {
    if (!proc_.taken_up.insert(id).second)
      sim_.violation("message taken up twice: " + codec::encode(id), pid_);
    if (!sim_.tx_has_trigger_)
      sim_.violation("take-up outside a packet transaction", pid_);
    auto& trigger = sim_.tx_buffer_.at(0);
    if (!trigger.subs.empty())
      trigger.subs.back().takeup = true;
    else
      trigger.takeup = true;
  }

  void note_noop_ack(const MessageId&) override {
    sim_.noop_acks_ += 1;
    if (!sim_.tx_has_trigger_) return;
    auto& trigger = sim_.tx_buffer_.at(0);
    if (!trigger.subs.empty())
      trigger.subs.back().noop = true;
    else
      trigger.noop_ack = true;
  }

  void note_sub(bool is_message, const MessageId& id) override {
    if (!sim_.tx_has_trigger_)
      sim_.violation("sub-transaction outside a packet transaction", pid_);
    auto& trigger = sim_.tx_buffer_.at(0);
    trigger.subs.push_back({is_message, id, false, false});
    sim_.tx_record_.subs += 1;
  }

 private:
  Simulator& sim_;
  Proc& proc_;
  ProcessId pid_;
};

class Simulator::ProcUlp : public Ulp {
 public:
  explicit ProcUlp(Proc& proc) : ulp_(proc.log) {}
  void ground_state() override { ulp_.ground_state(); }
  void apply_message(const std::string& payload,
                     const ProcessId& orig) override {
    ulp_.apply_message(payload, orig);
  }
  void apply_join(const ProcessId& pid) override { ulp_.apply_join(pid); }
  void apply_removal(const ProcessId& pid) override {
    ulp_.apply_removal(pid);
  }

 private:
  LogUlp ulp_;
};

void Simulator::violation(const std::string& what, const ProcessId& at) {
  throw SimInvariantViolation("invariant violation at " + at.id + " tick " +
                              std::to_string(tick_) + ": " + what);
}

void Simulator::begin_tx(TraceEvent trigger_event) {
  tx_buffer_.clear();
  tx_record_ = TxRecord{};
  tx_has_trigger_ = true;
  tx_buffer_.push_back(std::move(trigger_event));
}

// The parent half of a fork: the trigger record was already written, only
// the side effects of the join call remain.
void Simulator::begin_continuation() {
  tx_buffer_.clear();
  tx_record_ = TxRecord{};
  tx_has_trigger_ = false;
}

void Simulator::tx_event(TraceEvent ev) { tx_buffer_.push_back(std::move(ev)); }

void Simulator::flush_tx() {
  for (auto& ev : tx_buffer_) {
    ev.seq = next_seq_++;
    ev.tick = tick_;
    trace_ += render_trace_event(ev);
    ++event_count_;
    last_event_tick_ = tick_;
  }
  tx_buffer_.clear();
}

void Simulator::route(const ProcessId& from, const SideEffect& effect) {
  for (const auto& target : effect.targets) {
    Channel& ch = channels_[{from, target}];
    ch.queued += 1;
    bool dropped = false;
    for (const auto& rule : drop_rules_) {
      if (rule.pid == from && rule.pid2 == target &&
          ch.queued >= rule.from_ordinal && tick_ >= rule.tick) {
        dropped = true;
        break;
      }
    }
    if (!dropped) ch.queue.push_back(effect.packet);
  }
}

void Simulator::check_omnibus(Proc& p, ViewId expected_height) {
  const ProcessState& st = p.st;
  const ProcessId& self = st.self_id;
  auto keys_equal = [&](const auto& m) {
    if (m.size() != st.live_set.size()) return false;
    auto it = st.live_set.begin();
    for (const auto& kv : m) {
      if (kv.first != *it) return false;
      ++it;
    }
    return true;
  };
  if (st.view_height() != expected_height)
    violation("view height " + std::to_string(st.view_height()) +
                  " != trigger view " + std::to_string(expected_height),
              self);
  if (!keys_equal(st.fwd_queue) || !keys_equal(st.mpkt_in) ||
      !keys_equal(st.ghost) || !keys_equal(st.flush))
    violation("per-peer vectors not keyed by live set", self);
  {
    if (st.vt.size() != st.mset.size()) violation("vt not keyed by mset", self);
    auto it = st.mset.begin();
    for (const auto& kv : st.vt) {
      if (kv.first != *it) violation("vt not keyed by mset", self);
      ++it;
    }
  }
  const ViewId height = st.view_height();
  for (const auto& pid : st.live_set) {
    ViewId g = st.ghost.at(pid), f = st.flush.at(pid);
    if (!(f <= g && g <= height))
      violation("flush/ghost heights out of order for " + pid.id, self);
    if (!st.contact_set.count(pid) && g >= height)
      violation("uncontacted " + pid.id + " with full ghost height", self);
    if (st.v_gap == 0 && !(f == height && g == height))
      violation("gap-zero heights not settled for " + pid.id, self);
  }
  if (p.shadows_valid) {
    for (const auto& pid : st.live_set) {
      auto pg = p.prev_ghost.find(pid);
      if (pg != p.prev_ghost.end() && st.ghost.at(pid) < pg->second)
        violation("ghost[" + pid.id + "] decreased", self);
      auto pf = p.prev_flush.find(pid);
      if (pf != p.prev_flush.end() && st.flush.at(pid) < pf->second)
        violation("flush[" + pid.id + "] decreased", self);
    }
    if (st.ghost_height < p.prev_gh) violation("ghost_height decreased", self);
    if (st.flush_height < p.prev_fh) violation("flush_height decreased", self);
  }
  if (!st.live_set.count(self)) violation("self missing from live set", self);
  if (!(st.flush.at(self) <= st.flush_height &&
        st.flush_height <= st.ghost_height && st.ghost_height <= height))
    violation("own height chain out of order", self);
  if (st.v_gap > 0) {
    bool gh_full = st.ghost_height == height;
    bool fh_full = st.flush_height == height;
    if (gh_full != st.fwd_wait_set.empty())
      violation("ghost height / forward wait set mismatch", self);
    if (fh_full != st.wait_set_empty())
      violation("flush height / wait set mismatch", self);
  }
  if (st.v_gap == 0 && !st.launch_queue.empty())
    violation("gap zero with queued launches", self);

  p.prev_ghost = st.ghost;
  p.prev_flush = st.flush;
  p.prev_gh = st.ghost_height;
  p.prev_fh = st.flush_height;
  p.shadows_valid = true;
}

void Simulator::verify_shape(TriggerClass cls, const TxRecord& rec,
                             const ProcessId& at) {
  const auto& e = rec.effects;
  auto all_msg = [&]() {
    return std::ranges::all_of(e, [](PacketKind k) {
      return k == PacketKind::Msg;
    });
  };
  auto tail_flush_shape = [&](size_t from) {
    // [], [Ghost] or [Ghost, Flush]
    if (e.size() == from) return true;
    if (e[from] != PacketKind::Ghost) return false;
    if (e.size() == from + 1) return true;
    return e.size() == from + 2 && e[from + 1] == PacketKind::Flush;
  };
  bool ok = true;
  switch (cls) {
    case TriggerClass::Start:
      ok = e.empty();
      break;
    case TriggerClass::Request:
      ok = e.empty() || (e.size() == 1 && e[0] == PacketKind::Msg);
      break;
    case TriggerClass::Run:
      ok = e.empty() || (e.size() == 2 && e[0] == PacketKind::Ghost &&
                         e[1] == PacketKind::Flush);
      break;
    case TriggerClass::Join:
      ok = !e.empty() && e[0] == PacketKind::Donation && tail_flush_shape(1);
      break;
    case TriggerClass::Remove:
      ok = (!e.empty() && all_msg()) || tail_flush_shape(0);
      break;
    case TriggerClass::PktMsg:
      ok = e.size() == 1 && e[0] == PacketKind::Ack;
      break;
    case TriggerClass::PktAck:
      ok = e.empty() || (e.size() == 1 && (e[0] == PacketKind::Ghost ||
                                           e[0] == PacketKind::Flush)) ||
           (e.size() == 2 && e[0] == PacketKind::Ghost &&
            e[1] == PacketKind::Flush);
      break;
    case TriggerClass::PktGhost:
      ok = e.empty();
      break;
    case TriggerClass::PktFlush:
      ok = all_msg();
      break;
    case TriggerClass::PktDonation:
      ok = !e.empty() && e[0] == PacketKind::CoDonation;
      for (size_t i = 1; ok && i < e.size(); ++i)
        ok = e[i] == PacketKind::Ack || e[i] == PacketKind::Ghost ||
             e[i] == PacketKind::Flush;
      break;
    case TriggerClass::PktCoDonation:
      if (rec.installs > 0) {
        ok = all_msg() && rec.subs == 0;
      } else {
        ok = std::ranges::all_of(e, [](PacketKind k) {
          return k == PacketKind::Ack || k == PacketKind::Ghost ||
                 k == PacketKind::Flush;
        });
      }
      break;
  }
  if (ok) {
    // Multicast/unicast discipline per packet kind.
    for (size_t i = 0; i < e.size(); ++i) {
      bool should_multicast = e[i] == PacketKind::Msg ||
                              e[i] == PacketKind::Ghost ||
                              e[i] == PacketKind::Flush;
      if (rec.multicast[i] != should_multicast) {
        ok = false;
        break;
      }
    }
  }
  if (!ok) violation("side-effect shape mismatch", at);
}

void Simulator::start_all() {
  for (const auto& pid : scenario_.roster) {
    procs_[pid].instantiated = true;
    if (auto it = scripts_.find(pid); it != scripts_.end())
      procs_[pid].script = it->second;
  }
  for (const auto& pid : scenario_.roster) {
    Proc& p = procs_.at(pid);
    TraceEvent trigger;
    trigger.process = pid;
    trigger.kind = TraceEvent::Kind::Notify;
    trigger.view = 0;
    trigger.notification = Notification{Notification::Kind::New, pid, {}};
    begin_tx(std::move(trigger));
    ProcUlp ulp(p);
    Sink sink(*this, p, pid);
    prot::start(p.st,
                std::set<ProcessId>(scenario_.roster.begin(),
                                    scenario_.roster.end()),
                pid, ulp, sink);
    flush_tx();
    check_omnibus(p, 0);
    verify_shape(TriggerClass::Start, tx_record_, pid);
  }
}

void Simulator::apply_directives() {
  while (next_timed_ < timed_.size() && timed_[next_timed_].tick <= tick_) {
    const Directive& d = timed_[next_timed_++];
    switch (d.kind) {
      case Directive::Kind::ProposeJoin:
        gms_.propose_join(d.pid, d.pid2);
        break;
      case Directive::Kind::ProposeRemove:
        gms_.propose_remove(d.pid);
        break;
      case Directive::Kind::Halt: {
        auto [it, inserted] =
            planned_halts_.emplace(d.pid, d.tick);
        if (!inserted) it->second = std::min(it->second, d.tick);
        auto proc = procs_.find(d.pid);
        if (proc != procs_.end() && proc->second.instantiated &&
            !proc->second.halted)
          halt_process(d.pid, true);
        break;
      }
      default:
        break;
    }
  }
}

void Simulator::halt_process(const ProcessId& pid, bool emit_event) {
  Proc& p = procs_.at(pid);
  p.halted = true;
  if (emit_event) {
    TraceEvent ev;
    ev.process = pid;
    ev.kind = TraceEvent::Kind::Halt;
    ev.seq = next_seq_++;
    ev.tick = tick_;
    trace_ += render_trace_event(ev);
    ++event_count_;
    last_event_tick_ = tick_;
  }
}

void Simulator::grants() {
  for (auto& [pid, p] : procs_) {
    if (!p.instantiated || p.halted || !p.main_launched) continue;
    if (tick_ < p.main_ready_tick) continue;
    if (auto payload = p.script.step(tick_, p.log))
      p.requests.push_back(std::move(*payload));
  }
}

void Simulator::discard_sweep() {
  for (auto& [pid, p] : procs_) {
    if (!p.instantiated || p.halted) continue;
    for (auto& [key, ch] : channels_) {
      if (key.second != pid) continue;
      while (!ch.queue.empty() && p.removal_known.count(key.first)) {
        TraceEvent ev;
        ev.process = pid;
        ev.kind = TraceEvent::Kind::Discard;
        ev.peer = key.first;
        ev.packet = ch.queue.front();
        ev.seq = next_seq_++;
        ev.tick = tick_;
        trace_ += render_trace_event(ev);
        ++event_count_;
        last_event_tick_ = tick_;
        ch.queue.pop_front();
        ++discards_;
      }
    }
  }
}

std::vector<Simulator::Trigger> Simulator::collect_triggers() {
  std::vector<Trigger> out;
  for (auto& [pid, p] : procs_) {
    if (!p.instantiated || p.halted) continue;
    for (auto& [key, ch] : channels_) {
      if (key.second != pid || ch.queue.empty()) continue;
      if (ch.queue.front().piggyback_height > p.st.view_height()) continue;
      out.push_back({Trigger::Kind::Packet, pid, key.first});
    }
    const auto& nq = gms_.queue(pid);
    if (!nq.empty() && !gms_.dropped(pid, nq.front().view)) {
      // A pending self-channel packet is processed before any notification.
      auto self_ch = channels_.find({pid, pid});
      bool self_pending =
          self_ch != channels_.end() && !self_ch->second.queue.empty();
      if (!self_pending) out.push_back({Trigger::Kind::Notify, pid, {}});
    }
    if (!p.requests.empty()) out.push_back({Trigger::Kind::Request, pid, {}});
  }
  return out;
}

std::optional<std::uint64_t> Simulator::next_event_tick() const {
  std::optional<std::uint64_t> best;
  auto consider = [&](std::uint64_t t) {
    if (!best || t < *best) best = t;
  };
  if (next_timed_ < timed_.size()) consider(timed_[next_timed_].tick);
  for (const auto& [pid, p] : procs_) {
    if (!p.instantiated || p.halted || !p.main_launched) continue;
    // Steps fire strictly in order; a delivery-gated step with no trigger
    // left to satisfy it blocks everything behind it.
    if (p.script.next < p.script.steps.size()) {
      const auto& s = p.script.steps[p.script.next];
      if (s.at_tick) {
        std::uint64_t due = std::max(*s.at_tick, p.main_ready_tick);
        if (due > tick_) consider(due);
      }
    }
  }
  return best;
}

void Simulator::run_child(const ProcessId& child, ViewId view,
                          const Proc& parent) {
  Proc& c = procs_[child];
  c.instantiated = true;
  c.st = parent.st;  // byte-identical snapshot at the parent's dequeue
  c.log = parent.log;
  c.removal_known = parent.removal_known;
  if (auto it = scripts_.find(child); it != scripts_.end())
    c.script = it->second;
  TraceEvent trigger;
  trigger.process = child;
  trigger.kind = TraceEvent::Kind::Notify;
  trigger.view = view;
  trigger.notification = Notification{Notification::Kind::New, child, {}};
  begin_tx(std::move(trigger));
  ProcUlp ulp(c);
  Sink sink(*this, c, child);
  prot::run(c.st, child, ulp, sink);
  flush_tx();
  check_omnibus(c, view);
  verify_shape(TriggerClass::Run, tx_record_, child);
}

void Simulator::execute_notify(Proc& p, const ProcessId& pid) {
  auto pending = gms_.queue(pid).front();
  gms_.pop(pid);
  TraceEvent trigger;
  trigger.process = pid;
  trigger.kind = TraceEvent::Kind::Notify;
  trigger.view = pending.view;
  trigger.notification = pending.notification;

  const Notification& n = pending.notification;
  ProcUlp ulp(p);
  Sink sink(*this, p, pid);
  switch (n.kind) {
    case Notification::Kind::Remove:
      begin_tx(std::move(trigger));
      prot::remove(p.st, n.pid, ulp, sink);
      p.removal_known.insert(n.pid);
      flush_tx();
      check_omnibus(p, pending.view);
      verify_shape(TriggerClass::Remove, tx_record_, pid);
      break;
    case Notification::Kind::Join:
      if (n.parent == p.st.self_id) {
        // The parent forks the child, which runs as its own contemporaneous
        // transaction, then the parent handles the join on its own copy. A
        // suppressed birth record or an already-passed planned halt means
        // the child never comes up at all.
        begin_tx(std::move(trigger));
        flush_tx();
        auto planned = planned_halts_.find(n.pid);
        bool stillborn =
            planned != planned_halts_.end() && planned->second <= tick_;
        if (!gms_.dropped(n.pid, pending.view) && !stillborn)
          run_child(n.pid, pending.view, p);
        begin_continuation();
        prot::join(p.st, n.pid, n.parent, ulp, sink);
        flush_tx();
        check_omnibus(p, pending.view);
        verify_shape(TriggerClass::Join, tx_record_, pid);
      } else {
        begin_tx(std::move(trigger));
        prot::join(p.st, n.pid, n.parent, ulp, sink);
        flush_tx();
        check_omnibus(p, pending.view);
        verify_shape(TriggerClass::Join, tx_record_, pid);
      }
      break;
    case Notification::Kind::Dead:
      begin_tx(std::move(trigger));
      flush_tx();
      halt_process(pid, true);
      break;
    case Notification::Kind::New:
      violation("unexpected new-member record in queue", pid);
  }
}

void Simulator::execute(const Trigger& tr) {
  Proc& p = procs_.at(tr.proc);
  switch (tr.kind) {
    case Trigger::Kind::Packet: {
      Channel& ch = channels_.at({tr.from, tr.proc});
      Packet pkt = std::move(ch.queue.front());
      ch.queue.pop_front();
      TraceEvent trigger;
      trigger.process = tr.proc;
      trigger.kind = TraceEvent::Kind::PacketIn;
      trigger.peer = tr.from;
      trigger.packet = pkt;
      begin_tx(std::move(trigger));
      ProcUlp ulp(p);
      Sink sink(*this, p, tr.proc);
      ViewId pre_height = p.st.view_height();
      prot::packet(p.st, pkt, tr.from, ulp, sink);
      flush_tx();
      check_omnibus(p, pre_height);
      TriggerClass cls;
      switch (packet_kind(pkt)) {
        case PacketKind::Msg: cls = TriggerClass::PktMsg; break;
        case PacketKind::Ack: cls = TriggerClass::PktAck; break;
        case PacketKind::Ghost: cls = TriggerClass::PktGhost; break;
        case PacketKind::Flush: cls = TriggerClass::PktFlush; break;
        case PacketKind::Donation: cls = TriggerClass::PktDonation; break;
        default: cls = TriggerClass::PktCoDonation; break;
      }
      verify_shape(cls, tx_record_, tr.proc);
      break;
    }
    case Trigger::Kind::Notify:
      execute_notify(p, tr.proc);
      break;
    case Trigger::Kind::Request: {
      std::string payload = std::move(p.requests.front());
      p.requests.pop_front();
      TraceEvent trigger;
      trigger.process = tr.proc;
      trigger.kind = TraceEvent::Kind::RequestIn;
      trigger.payload = payload;
      begin_tx(std::move(trigger));
      ProcUlp ulp(p);
      Sink sink(*this, p, tr.proc);
      ViewId pre_height = p.st.view_height();
      prot::broadcast(p.st, std::move(payload), ulp, sink);
      flush_tx();
      check_omnibus(p, pre_height);
      verify_shape(TriggerClass::Request, tx_record_, tr.proc);
      break;
    }
  }
}

SimResult Simulator::run() {
  trace_ = render_trace_header(
      hex16(codec::fnv1a64(render_scenario(scenario_))), seed_);
  start_all();
  tick_ = 1;
  bool quiescent = false;
  while (true) {
    apply_directives();
    grants();
    discard_sweep();
    auto triggers = collect_triggers();
    if (triggers.empty()) {
      auto next = next_event_tick();
      if (!next) {
        quiescent = true;
        break;
      }
      std::uint64_t target = std::max(tick_ + 1, *next);
      if (target > max_ticks_) break;  // timeout with work still scheduled
      tick_ = target;
      continue;
    }
    if (tick_ > max_ticks_) break;  // timeout with enabled triggers
    execute(triggers[rng_.below(triggers.size())]);
    tick_ += 1;
  }

  SimResult result;
  result.quiescent = quiescent;
  result.ticks = quiescent ? last_event_tick_ : tick_;
  result.discards = discards_;
  result.noop_acks = noop_acks_;
  trace_ += render_trace_end(quiescent, result.ticks, event_count_);
  result.trace = std::move(trace_);
  for (auto& [pid, p] : procs_) {
    if (!p.instantiated) continue;
    result.logs[pid] = p.log;
    result.states[pid] = p.st;
    if (quiescent && !p.halted) {
      for (const auto& [key, ch] : channels_) {
        if (key.second == pid && !ch.queue.empty())
          result.anomalies.push_back("undelivered packets on " +
                                     key.first.id + "->" + pid.id);
      }
      if (!gms_.queue(pid).empty())
        result.anomalies.push_back("undequeued notifications at " + pid.id);
      if (!p.requests.empty())
        result.anomalies.push_back("undequeued requests at " + pid.id);
      if (p.st.v_gap > 0)
        result.anomalies.push_back("announced views never installed at " +
                                   pid.id);
    }
  }
  return result;
}

}  // namespace

SimResult run_scenario_sim(const Scenario& sc, const SimOptions& opt) {
  validate_scenario(sc);
  Simulator sim(sc, opt);
  return sim.run();
}

}  // namespace cbcast
