#pragma once

#include <deque>
#include <set>

#include "cbcast/packet.hpp"
#include "cbcast/ulp.hpp"

namespace cbcast {

struct PendingView {
  enum class Kind { Join, Remove };
  Kind kind = Kind::Join;
  ProcessId pid;
  auto operator<=>(const PendingView&) const = default;
};

// Full per-process protocol state. Copyable by value: a joining process is
// created as a deep snapshot of its parent.
struct ProcessState {
  ViewId cur_view = 0;
  std::uint64_t v_gap = 0;
  ProcessId self_id;
  std::set<ProcessId> mset;
  std::deque<PendingView> pend_view_queue;
  std::set<ProcessId> live_set;
  std::set<ProcessId> contact_set;
  VectorTime vt;
  std::map<MessageId, StampedMessage> receive_set;
  std::map<ProcessId, std::deque<StampedMessage>> fwd_queue;
  std::vector<WaitRecord> bcast_wait_set;
  std::vector<WaitRecord> fwd_wait_set;
  std::deque<std::string> launch_queue;
  ViewId ghost_height = 0;
  ViewId flush_height = 0;
  std::map<ProcessId, ViewId> ghost;
  std::map<ProcessId, ViewId> flush;
  CounterPair mpkt_out;
  std::map<ProcessId, CounterPair> mpkt_in;

  ViewId view_height() const { return cur_view + v_gap; }
  bool wait_set_empty() const {
    return bcast_wait_set.empty() && fwd_wait_set.empty();
  }
  auto operator<=>(const ProcessState&) const = default;
};

// One packet queuing request. Multicasts target exactly the emitter's
// contact set at emission time; acks and donations are unicasts.
struct SideEffect {
  Packet packet;
  std::set<ProcessId> targets;
  bool multicast = false;
};

// Receives side effects and bookkeeping notes from a transaction. The
// simulator implements this to route packets and build the trace; tests use
// a plain collecting sink.
class TransactionSink {
 public:
  virtual ~TransactionSink() = default;
  virtual void emit(SideEffect effect) = 0;
  virtual void launch_main() {}
  virtual void note_install(ViewId /*view*/, std::uint64_t /*gap*/) {}
  virtual void note_deliver(const MessageId& /*id*/,
                            const std::string& /*payload*/) {}
  virtual void note_takeup(const MessageId& /*id*/) {}
  virtual void note_noop_ack(const MessageId& /*id*/) {}
  virtual void note_sub(bool /*is_message*/, const MessageId& /*id*/) {}
};

// Collecting sink for unit tests.
struct RecordingSink : TransactionSink {
  std::vector<SideEffect> effects;
  std::vector<std::pair<ViewId, std::uint64_t>> installs;
  std::vector<MessageId> deliveries;
  std::vector<MessageId> takeups;
  std::vector<std::pair<bool, MessageId>> subs;
  int main_launches = 0;
  int noop_acks = 0;
  void emit(SideEffect effect) override {
    effects.push_back(std::move(effect));
  }
  void launch_main() override { ++main_launches; }
  void note_install(ViewId v, std::uint64_t g) override {
    installs.emplace_back(v, g);
  }
  void note_deliver(const MessageId& id, const std::string&) override {
    deliveries.push_back(id);
  }
  void note_takeup(const MessageId& id) override { takeups.push_back(id); }
  void note_noop_ack(const MessageId&) override { ++noop_acks; }
  void note_sub(bool is_message, const MessageId& id) override {
    subs.emplace_back(is_message, id);
  }
};

// The per-process state machine. Every call is one atomic transaction over
// the state; packets go out through the sink, deliveries through the Ulp.
namespace prot {

void start(ProcessState& st, const std::set<ProcessId>& roster,
           const ProcessId& pid, Ulp& ulp, TransactionSink& sink);
void broadcast(ProcessState& st, std::string payload, Ulp& ulp,
               TransactionSink& sink);
void run(ProcessState& st, const ProcessId& pid, Ulp& ulp,
         TransactionSink& sink);
void remove(ProcessState& st, const ProcessId& rem, Ulp& ulp,
            TransactionSink& sink);
void join(ProcessState& st, const ProcessId& jn, const ProcessId& parent,
          Ulp& ulp, TransactionSink& sink);
void packet(ProcessState& st, const Packet& pkt, const ProcessId& sender,
            Ulp& ulp, TransactionSink& sink);

// Packet handlers, exposed for focused tests.
void receive_message(ProcessState& st, const StampedMessage& msg,
                     const ProcessId& sender, Ulp& ulp, TransactionSink& sink);
void receive_ack(ProcessState& st, const MessageId& id,
                 const ProcessId& sender, Ulp& ulp, TransactionSink& sink);
void receive_ghost(ProcessState& st, ViewId view, const ProcessId& sender);
void receive_flush(ProcessState& st, ViewId view, const ProcessId& sender,
                   Ulp& ulp, TransactionSink& sink);
void receive_donation(ProcessState& st, const DonationBody& body,
                      const ProcessId& sender, Ulp& ulp,
                      TransactionSink& sink);
void receive_codonation(ProcessState& st, const DonationBody& body,
                        const ProcessId& sender, Ulp& ulp,
                        TransactionSink& sink);

// Service routines.
void check_flush(ProcessState& st, TransactionSink& sink);
void try_to_install(ProcessState& st, Ulp& ulp, TransactionSink& sink);
void scan(ProcessState& st, Ulp& ulp, TransactionSink& sink);

}  // namespace prot

}  // namespace cbcast
