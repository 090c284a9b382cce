#include <doctest.h>

#include <algorithm>

#include "cbcast/checker.hpp"
#include "cbcast/simnet.hpp"

using namespace cbcast;

namespace {

Scenario make(const std::string& text) { return parse_scenario(text); }

std::size_t count_kind(const ParsedTrace& t, TraceEvent::Kind k) {
  return std::count_if(t.events.begin(), t.events.end(),
                       [&](const TraceEvent& e) { return e.kind == k; });
}

}  // namespace

TEST_CASE("empty scenario is quiescent at tick zero") {
  SimResult r = run_scenario_sim(make("roster A B\n"));
  CHECK(r.quiescent);
  CHECK(r.ticks == 0);
  CHECK(r.anomalies.empty());
}

TEST_CASE("one broadcast in a two-process group settles with a fixed trace") {
  // Hand replay of the pseudocode: two start records, the request, the
  // message multicast, receipt/ack/delivery at both members, and the two
  // ack receipts back at the sender.
  SimResult r = run_scenario_sim(
      make("seed 7\nroster A B\nat 1 broadcast A x\n"));
  CHECK(r.quiescent);
  ParsedTrace t = parse_trace(r.trace);
  CHECK(t.events.size() == 12);
  CHECK(count_kind(t, TraceEvent::Kind::Notify) == 2);
  CHECK(count_kind(t, TraceEvent::Kind::RequestIn) == 1);
  CHECK(count_kind(t, TraceEvent::Kind::Queue) == 3);     // msg + two acks
  CHECK(count_kind(t, TraceEvent::Kind::PacketIn) == 4);  // 2 msgs + 2 acks
  CHECK(count_kind(t, TraceEvent::Kind::Deliver) == 2);
  REQUIRE(r.logs.count(ProcessId{"A"}));
  CHECK(r.logs.at(ProcessId{"A"}).message_count() == 1);
  CHECK(r.logs.at(ProcessId{"B"}).message_count() == 1);
}

TEST_CASE("a multicast is one queuing event with one packet per target") {
  SimResult r = run_scenario_sim(
      make("seed 3\nroster A B C\nat 1 broadcast A x\n"));
  ParsedTrace t = parse_trace(r.trace);
  const TraceEvent* queue_ev = nullptr;
  for (const auto& ev : t.events) {
    if (ev.kind == TraceEvent::Kind::Queue &&
        packet_kind(ev.packet) == PacketKind::Msg) {
      CHECK(queue_ev == nullptr);  // exactly one multicast record
      queue_ev = &ev;
    }
  }
  REQUIRE(queue_ev);
  CHECK(queue_ev->targets ==
        std::vector<ProcessId>{ProcessId{"A"}, ProcessId{"B"},
                               ProcessId{"C"}});
  // one receipt per member, including the sender's own self-channel copy
  std::size_t receipts = 0;
  for (const auto& ev : t.events)
    if (ev.kind == TraceEvent::Kind::PacketIn &&
        packet_kind(ev.packet) == PacketKind::Msg)
      ++receipts;
  CHECK(receipts == 3);
}

TEST_CASE("acks are unicast") {
  SimResult r = run_scenario_sim(
      make("seed 3\nroster A B\nat 1 broadcast A x\n"));
  ParsedTrace t = parse_trace(r.trace);
  for (const auto& ev : t.events)
    if (ev.kind == TraceEvent::Kind::Queue &&
        packet_kind(ev.packet) == PacketKind::Ack)
      CHECK(ev.targets.size() == 1);
}

TEST_CASE("channels deliver in queuing order") {
  SimResult r = run_scenario_sim(make(
      "seed 5\nroster A B\nat 1 broadcast A one\nat 1 broadcast A two\n"));
  ParsedTrace t = parse_trace(r.trace);
  // B's receipts from A must carry payload one before two.
  std::vector<std::string> order;
  for (const auto& ev : t.events) {
    if (ev.kind == TraceEvent::Kind::PacketIn &&
        ev.process == ProcessId{"B"} && ev.peer == ProcessId{"A"} &&
        packet_kind(ev.packet) == PacketKind::Msg)
      order.push_back(std::get<MsgPacket>(ev.packet.body).msg.payload);
  }
  CHECK(order == std::vector<std::string>{"one", "two"});
}

TEST_CASE("halted targets never process queued packets") {
  SimResult r = run_scenario_sim(make(
      "seed 1\nroster A B C\nat 1 remove C\nat 2 halt C\n"
      "at 3 broadcast A x\n"));
  CHECK(r.quiescent);
  ParsedTrace t = parse_trace(r.trace);
  std::uint64_t halt_seq = 0;
  for (const auto& ev : t.events)
    if (ev.kind == TraceEvent::Kind::Halt && ev.process == ProcessId{"C"})
      halt_seq = ev.seq;
  REQUIRE(halt_seq > 0);
  for (const auto& ev : t.events)
    if (ev.process == ProcessId{"C"})
      CHECK(ev.seq <= halt_seq);
}

TEST_CASE("a removed process halts at its death notification") {
  SimResult r = run_scenario_sim(make(
      "seed 2\nroster A B\nat 1 remove B\nat 400 halt B\n"));
  ParsedTrace t = parse_trace(r.trace);
  bool saw_dead = false;
  for (const auto& ev : t.events) {
    if (ev.process != ProcessId{"B"}) continue;
    if (ev.kind == TraceEvent::Kind::Notify &&
        ev.notification.kind == Notification::Kind::Dead)
      saw_dead = true;
    else if (saw_dead)
      CHECK(ev.kind == TraceEvent::Kind::Halt);
  }
  CHECK(saw_dead);
}

TEST_CASE("exhausting the tick budget reports a timeout") {
  SimResult r = run_scenario_sim(make(
      "seed 1\nmax_ticks 3\nroster A B\nat 1 broadcast A x\n"
      "at 2 broadcast B y\nat 3 broadcast A z\nat 4 broadcast B w\n"));
  CHECK_FALSE(r.quiescent);
}

TEST_CASE("identical scenario and seed give identical trace bytes") {
  Scenario sc = generate_scenarios(31337, 1)[0];
  SimResult a = run_scenario_sim(sc);
  SimResult b = run_scenario_sim(sc);
  CHECK(a.trace == b.trace);
  SimOptions other;
  other.seed = sc.seed + 1;
  SimResult c = run_scenario_sim(sc, other);
  CHECK(c.quiescent);  // different schedule, same outcome class
}

TEST_CASE("non-halting members converge on the same message log") {
  Scenario sc = make(
      "seed 12\nroster A B C\nat 1 broadcast A a1\nat 2 broadcast B b1\n"
      "at 3 remove C\nat 4 broadcast B b2\nat 9 halt C\n");
  SimResult r = run_scenario_sim(sc);
  REQUIRE(r.quiescent);
  std::multiset<std::string> a, b;
  for (const auto& e : r.logs.at(ProcessId{"A"}).entries)
    if (e.kind == DeliveryLog::Entry::Kind::Message) a.insert(e.payload);
  for (const auto& e : r.logs.at(ProcessId{"B"}).entries)
    if (e.kind == DeliveryLog::Entry::Kind::Message) b.insert(e.payload);
  CHECK(a == b);
}

TEST_CASE("late main launch delays the first request") {
  SimOptions opt;
  opt.main_launch_delay = 10;
  SimResult r = run_scenario_sim(
      make("seed 4\nroster A B\nat 1 broadcast A x\n"), opt);
  ParsedTrace t = parse_trace(r.trace);
  for (const auto& ev : t.events)
    if (ev.kind == TraceEvent::Kind::RequestIn) CHECK(ev.tick >= 10);
  CHECK(r.logs.at(ProcessId{"B"}).message_count() == 1);
}

TEST_CASE("every conforming run satisfies the network model rules") {
  for (const auto& sc : generate_scenarios(2024, 8)) {
    SimResult r = run_scenario_sim(sc);
    ParsedTrace t = parse_trace(r.trace);
    Verdict v = check_model_conformance(t);
    INFO(sc.name << ": " << v.detail);
    CHECK_FALSE(v.failed());
  }
}
