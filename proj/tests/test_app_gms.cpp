#include <doctest.h>

#include "cbcast/gms.hpp"
#include "cbcast/protocol.hpp"

using namespace cbcast;

namespace {
const ProcessId A{"A"}, B{"B"}, C{"C"}, J{"J"};
}

TEST_CASE("ground state is the empty log, identically everywhere") {
  DeliveryLog a = log_ground_state();
  DeliveryLog b = log_ground_state();
  CHECK(a.entries.empty());
  CHECK(a == b);
  CHECK(log_ground_state() == a);  // idempotent
}

TEST_CASE("log application appends and preserves prefixes") {
  DeliveryLog log;
  log_apply_message(log, "x", A);
  REQUIRE(log.entries.size() == 1);
  CHECK(log.entries[0].payload == "x");
  DeliveryLog before = log;
  log_apply_join(log, J);
  log_apply_removal(log, B);
  CHECK(std::equal(before.entries.begin(), before.entries.end(),
                   log.entries.begin()));
  CHECK(log.entries[1].kind == DeliveryLog::Entry::Kind::Join);
  CHECK(log.entries[2].kind == DeliveryLog::Entry::Kind::Removal);
}

TEST_CASE("log renders one canonical line per entry") {
  DeliveryLog log;
  log_apply_message(log, "hi there", A);
  log_apply_join(log, J);
  log_apply_removal(log, B);
  CHECK(log.render() == "msg A hi%20there\njoin J\nremoval B\n");
}

TEST_CASE("script steps fire once, in order, when their tick arrives") {
  MainScript script;
  script.steps.push_back({5, std::nullopt, "a"});
  script.steps.push_back({7, std::nullopt, "b"});
  DeliveryLog log;
  CHECK_FALSE(script.step(4, log).has_value());
  auto first = script.step(5, log);
  REQUIRE(first.has_value());
  CHECK(*first == "a");
  CHECK_FALSE(script.step(5, log).has_value());  // next step not due yet
  auto second = script.step(9, log);
  REQUIRE(second.has_value());
  CHECK(*second == "b");
  CHECK_FALSE(script.step(100, log).has_value());  // exhausted
  CHECK(script.exhausted());
}

TEST_CASE("delivery-gated script steps watch the replicated data") {
  MainScript script;
  script.steps.push_back({std::nullopt, 2, "reply"});
  DeliveryLog log;
  CHECK_FALSE(script.step(50, log).has_value());
  log_apply_message(log, "one", A);
  CHECK_FALSE(script.step(51, log).has_value());
  log_apply_message(log, "two", B);
  auto fired = script.step(52, log);
  REQUIRE(fired.has_value());
  CHECK(*fired == "reply");
}

TEST_CASE("removal notifies survivors and tells the victim it is dead") {
  GmsOracle gms({A, B, C});
  ViewId v = gms.propose_remove(C);
  CHECK(v == 1);
  REQUIRE(gms.queue(A).size() == 1);
  CHECK(gms.queue(A).front().notification ==
        Notification{Notification::Kind::Remove, C, {}});
  CHECK(gms.queue(B).front().notification ==
        Notification{Notification::Kind::Remove, C, {}});
  REQUIRE(gms.queue(C).size() == 1);
  CHECK(gms.queue(C).front().notification.kind == Notification::Kind::Dead);
}

TEST_CASE("join notifies every existing member with the parent") {
  GmsOracle gms({A, B});
  ViewId v = gms.propose_join(J, A);
  CHECK(v == 1);
  Notification expect{Notification::Kind::Join, J, A};
  CHECK(gms.queue(A).front().notification == expect);
  CHECK(gms.queue(B).front().notification == expect);
  CHECK(gms.queue(J).empty());  // the child learns through the fork
  CHECK(gms.views().members.back() == std::set<ProcessId>{A, B, J});
}

TEST_CASE("illegal membership changes are rejected") {
  GmsOracle gms({A, B});
  CHECK_THROWS_AS(gms.propose_remove(C), ScenarioError);
  gms.propose_remove(B);
  CHECK_THROWS_AS(gms.propose_join(B, A), ScenarioError);  // ids never reused
  CHECK_THROWS_AS(gms.propose_join(J, B), ScenarioError);  // dead parent
}

TEST_CASE("a forked child starts from an identical state snapshot") {
  ProcessState parent;
  DeliveryLog log;
  LogUlp ulp(log);
  RecordingSink sink;
  prot::start(parent, {A, B}, A, ulp, sink);
  prot::broadcast(parent, "x", ulp, sink);
  ProcessState child = parent;  // the fork copy
  CHECK(child == parent);
  prot::run(child, J, ulp, sink);
  CHECK(child != parent);       // independent identities afterwards
  CHECK(parent.self_id == A);
  CHECK(child.self_id == J);
}

TEST_CASE("consecutive joins fork from distinct snapshots") {
  ProcessState parent;
  DeliveryLog log;
  LogUlp ulp(log);
  RecordingSink sink;
  prot::start(parent, {A}, A, ulp, sink);
  ProcessState first_child = parent;
  prot::join(parent, ProcessId{"J1"}, A, ulp, sink);
  ProcessState second_child = parent;
  CHECK(first_child != second_child);
  CHECK_FALSE(first_child.live_set.count(ProcessId{"J1"}));
  CHECK(second_child.live_set.count(ProcessId{"J1"}));
}
