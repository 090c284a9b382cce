// Acceptance suite: drives the full stack over generated and engineered
// scenario populations and prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "cbcast/checker.hpp"
#include "cbcast/rng.hpp"
#include "cbcast/scenario.hpp"
#include "cbcast/simnet.hpp"
#include "side_effect_cases.hpp"

using namespace cbcast;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("%s criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  if (!pass) ++failures;
}

struct RunOutcome {
  Scenario scenario;
  SimResult sim;
  ParsedTrace trace;
  CheckReport report;
  bool invariant_violation = false;
  std::string violation_text;
};

RunOutcome run_one(const Scenario& sc) {
  RunOutcome out;
  out.scenario = sc;
  try {
    out.sim = run_scenario_sim(sc);
  } catch (const SimInvariantViolation& e) {
    out.invariant_violation = true;
    out.violation_text = e.what();
    return out;
  }
  out.trace = parse_trace(out.sim.trace);
  out.report = run_all_checks(out.trace);
  return out;
}

bool verdict_passed(const RunOutcome& out, const char* property) {
  const Verdict* v = out.report.find(property);
  return v && !v->failed();
}

// --- trace mutations for the sensitivity criterion -------------------------

using Mutation = std::function<bool(ParsedTrace&)>;  // false = not applicable

ParsedTrace reparse(const ParsedTrace& t) { return parse_trace(render_trace(t)); }

bool is_msg_in(const TraceEvent& ev) {
  return ev.kind == TraceEvent::Kind::PacketIn &&
         packet_kind(ev.packet) == PacketKind::Msg;
}

// Swap the contents of two deliveries at one process.
bool mutate_swap_deliveries(ParsedTrace& t) {
  for (size_t i = 0; i < t.events.size(); ++i) {
    if (t.events[i].kind != TraceEvent::Kind::Deliver) continue;
    for (size_t j = i + 1; j < t.events.size(); ++j) {
      if (t.events[j].kind != TraceEvent::Kind::Deliver) continue;
      if (t.events[j].process != t.events[i].process) continue;
      if (t.events[j].mid == t.events[i].mid) continue;
      std::swap(t.events[i].mid, t.events[j].mid);
      std::swap(t.events[i].payload, t.events[j].payload);
      return true;
    }
  }
  return false;
}

// Delete one process's delivery of a message someone else also delivered.
bool mutate_drop_delivery(ParsedTrace& t) {
  for (size_t i = 0; i < t.events.size(); ++i) {
    const TraceEvent& ev = t.events[i];
    if (ev.kind != TraceEvent::Kind::Deliver) continue;
    for (size_t j = 0; j < t.events.size(); ++j) {
      if (j == i) continue;
      const TraceEvent& other = t.events[j];
      if (other.kind == TraceEvent::Kind::Deliver && other.mid == ev.mid &&
          other.process != ev.process) {
        t.events.erase(t.events.begin() + i);
        return true;
      }
    }
  }
  return false;
}

bool mutate_drop_all_deliveries_at_one_process(ParsedTrace& t) {
  for (const auto& ev : t.events) {
    if (ev.kind != TraceEvent::Kind::Deliver) continue;
    ProcessId victim = ev.process;
    std::erase_if(t.events, [&](const TraceEvent& e) {
      return e.kind == TraceEvent::Kind::Deliver && e.process == victim;
    });
    return true;
  }
  return false;
}

// Delete the first of two consecutive same-originator deliveries; the second
// then lands without its predecessor being familiar.
bool mutate_drop_first_of_pair(ParsedTrace& t) {
  for (size_t i = 0; i < t.events.size(); ++i) {
    const TraceEvent& d1 = t.events[i];
    if (d1.kind != TraceEvent::Kind::Deliver) continue;
    auto s1 = d1.mid.mvt.find(d1.mid.orig);
    if (s1 == d1.mid.mvt.end()) continue;
    for (size_t j = i + 1; j < t.events.size(); ++j) {
      const TraceEvent& d2 = t.events[j];
      if (d2.kind != TraceEvent::Kind::Deliver || d2.process != d1.process)
        continue;
      if (d2.mid.orig != d1.mid.orig || d2.mid.mview != d1.mid.mview)
        continue;
      auto s2 = d2.mid.mvt.find(d2.mid.orig);
      if (s2 == d2.mid.mvt.end() || s2->second != s1->second + 1) continue;
      t.events.erase(t.events.begin() + i);
      return true;
    }
  }
  return false;
}

// Remove the halt record of a removed process, making it look non-halting.
bool mutate_unhalt(ParsedTrace& t) {
  for (size_t i = 0; i < t.events.size(); ++i) {
    if (t.events[i].kind == TraceEvent::Kind::Halt) {
      t.events.erase(t.events.begin() + i);
      return true;
    }
  }
  return false;
}

// Remove every receipt of one message at one process (receipt agreement).
bool mutate_drop_receipts_nth(ParsedTrace& t, int skip) {
  // Find a message received by two distinct processes besides its origin.
  for (const auto& ev : t.events) {
    if (!is_msg_in(ev)) continue;
    MessageId id = message_id(std::get<MsgPacket>(ev.packet.body).msg);
    for (const auto& other : t.events) {
      if (!is_msg_in(other) || other.process == ev.process) continue;
      if (message_id(std::get<MsgPacket>(other.packet.body).msg) != id)
        continue;
      if (skip-- > 0) continue;
      ProcessId victim = other.process;
      std::erase_if(t.events, [&](const TraceEvent& e) {
        if (e.process != victim) return false;
        if (is_msg_in(e) &&
            message_id(std::get<MsgPacket>(e.packet.body).msg) == id)
          return true;
        return e.kind == TraceEvent::Kind::Deliver && e.mid == id;
      });
      for (auto& e : t.events) {
        if (e.process != victim || e.kind != TraceEvent::Kind::PacketIn)
          continue;
        std::erase_if(e.subs, [&](const SubTransaction& s) {
          return s.is_message && s.id == id;
        });
      }
      return true;
    }
  }
  return false;
}

bool mutate_drop_receipts(ParsedTrace& t) {
  return mutate_drop_receipts_nth(t, 0);
}

bool mutate_drop_receipts_second(ParsedTrace& t) {
  return mutate_drop_receipts_nth(t, 1);
}

// Rewrite a pre-install receipt at a gap-zero installer into a message
// nobody else ever saw.
bool mutate_forge_receipt(ParsedTrace& t) {
  for (const auto& inst : t.events) {
    if (inst.kind != TraceEvent::Kind::Install || inst.gap != 0 ||
        inst.view == 0)
      continue;
    bool other_installer = false;
    for (const auto& other : t.events)
      if (other.kind == TraceEvent::Kind::Install &&
          other.view == inst.view && other.process != inst.process)
        other_installer = true;
    if (!other_installer) continue;
    for (auto& ev : t.events) {
      if (!is_msg_in(ev) || ev.process != inst.process ||
          ev.seq >= inst.seq)
        continue;
      auto& m = std::get<MsgPacket>(ev.packet.body).msg;
      m.orig = ProcessId{"zz"};
      m.mview = inst.view - 1;
      m.mvt = {{ProcessId{"zz"}, 1}};
      m.payload = "forged";
      return true;
    }
  }
  return false;
}

// Claim a wider installation gap than the flushes on record justify.
bool mutate_inflate_gap(ParsedTrace& t) {
  ViewId max_view = 0;
  for (const auto& ev : t.events)
    if (ev.kind == TraceEvent::Kind::Notify) max_view = std::max(max_view, ev.view);
  for (auto& ev : t.events) {
    if (ev.kind != TraceEvent::Kind::Install) continue;
    ViewId h = ev.view + ev.gap + 1;
    if (h > max_view) continue;
    bool proc_in_h = false;
    for (const auto& n : t.events)
      if (n.kind == TraceEvent::Kind::Notify && n.process == ev.process &&
          n.view == h && n.notification.kind != Notification::Kind::Dead)
        proc_in_h = true;
    if (!proc_in_h) continue;
    ev.gap += 1;
    return true;
  }
  return false;
}

// Remove a donated flush height that justified an installation.
bool mutate_drop_donated_flush(ParsedTrace& t) {
  for (const auto& inst : t.events) {
    if (inst.kind != TraceEvent::Kind::Install) continue;
    ViewId height = inst.view + inst.gap;
    for (size_t i = 0; i < t.events.size(); ++i) {
      const TraceEvent& ev = t.events[i];
      if (ev.kind != TraceEvent::Kind::PacketIn ||
          ev.process != inst.process || ev.seq >= inst.seq)
        continue;
      ViewId fh = 0;
      if (packet_kind(ev.packet) == PacketKind::Donation)
        fh = std::get<DonationPacket>(ev.packet.body).body.flush_height;
      else if (packet_kind(ev.packet) == PacketKind::CoDonation)
        fh = std::get<CoDonationPacket>(ev.packet.body).body.flush_height;
      else
        continue;
      if (fh != height) continue;
      // No plain flush at that height from the same peer may back it up.
      bool backed = false;
      for (const auto& other : t.events)
        if (other.kind == TraceEvent::Kind::PacketIn &&
            other.process == inst.process && other.peer == ev.peer &&
            other.seq < inst.seq &&
            packet_kind(other.packet) == PacketKind::Flush &&
            std::get<FlushPacket>(other.packet.body).view == height)
          backed = true;
      if (backed) continue;
      t.events.erase(t.events.begin() + i);
      return true;
    }
  }
  return false;
}

// Clear the take-up flag at the forwarder a later take-up depends on.
bool mutate_clear_sender_takeup(ParsedTrace& t) {
  for (const auto& ev : t.events) {
    if (!is_msg_in(ev) || !ev.takeup) continue;
    MessageId id = message_id(std::get<MsgPacket>(ev.packet.body).msg);
    if (ev.peer == id.orig || ev.peer == ev.process) continue;
    bool cleared = false;
    for (auto& other : t.events) {
      if (other.process != ev.peer ||
          other.kind != TraceEvent::Kind::PacketIn)
        continue;
      if (is_msg_in(other) && other.takeup &&
          message_id(std::get<MsgPacket>(other.packet.body).msg) == id) {
        other.takeup = false;
        cleared = true;
      }
      for (auto& sub : other.subs)
        if (sub.is_message && sub.takeup && sub.id == id) {
          sub.takeup = false;
          cleared = true;
        }
    }
    if (cleared) return true;
  }
  return false;
}

// Point a take-up at a bystander that never held the message.
bool mutate_retarget_takeup(ParsedTrace& t) {
  std::set<ProcessId> originals;
  for (const auto& ev : t.events)
    if (ev.kind == TraceEvent::Kind::Notify && ev.view == 0 &&
        ev.notification.kind == Notification::Kind::New)
      originals.insert(ev.process);
  for (auto& ev : t.events) {
    if (!is_msg_in(ev) || !ev.takeup) continue;
    MessageId id = message_id(std::get<MsgPacket>(ev.packet.body).msg);
    for (const auto& z : originals) {
      if (z == id.orig || z == ev.process) continue;
      bool held = false;
      for (const auto& other : t.events) {
        if (other.process != z || other.kind != TraceEvent::Kind::PacketIn)
          continue;
        if (is_msg_in(other) && other.takeup &&
            message_id(std::get<MsgPacket>(other.packet.body).msg) == id)
          held = true;
        for (const auto& sub : other.subs)
          if (sub.is_message && sub.takeup && sub.id == id) held = true;
      }
      if (held) continue;
      ev.peer = z;
      return true;
    }
  }
  return false;
}

// Remove one flush receipt that justified an installation.
bool mutate_drop_flush_evidence(ParsedTrace& t) {
  for (const auto& inst : t.events) {
    if (inst.kind != TraceEvent::Kind::Install) continue;
    ViewId height = inst.view + inst.gap;
    for (size_t i = 0; i < t.events.size(); ++i) {
      const TraceEvent& ev = t.events[i];
      if (ev.kind != TraceEvent::Kind::PacketIn ||
          ev.process != inst.process || ev.seq >= inst.seq)
        continue;
      if (packet_kind(ev.packet) == PacketKind::Flush &&
          std::get<FlushPacket>(ev.packet.body).view == height) {
        t.events.erase(t.events.begin() + i);
        return true;
      }
    }
  }
  return false;
}

// Flag a duplicate receipt as a second take-up.
bool mutate_double_takeup(ParsedTrace& t) {
  for (auto& ev : t.events) {
    if (!is_msg_in(ev) || ev.takeup) continue;
    MessageId id = message_id(std::get<MsgPacket>(ev.packet.body).msg);
    for (const auto& other : t.events) {
      if (&other == &ev || other.process != ev.process) continue;
      bool taken = (is_msg_in(other) && other.takeup &&
                    message_id(std::get<MsgPacket>(other.packet.body).msg) ==
                        id);
      if (!taken && other.kind == TraceEvent::Kind::PacketIn) {
        for (const auto& s : other.subs)
          if (s.is_message && s.takeup && s.id == id) taken = true;
      }
      if (taken) {
        ev.takeup = true;
        return true;
      }
    }
  }
  return false;
}

// Reorder a channel by swapping the packets of two receipts.
bool mutate_reorder_channel(ParsedTrace& t) {
  for (size_t i = 0; i < t.events.size(); ++i) {
    const TraceEvent& a = t.events[i];
    if (a.kind != TraceEvent::Kind::PacketIn) continue;
    for (size_t j = i + 1; j < t.events.size(); ++j) {
      const TraceEvent& b = t.events[j];
      if (b.kind != TraceEvent::Kind::PacketIn) continue;
      if (a.process != b.process || a.peer != b.peer) continue;
      if (a.packet == b.packet) continue;
      std::swap(t.events[i].packet, t.events[j].packet);
      std::swap(t.events[i].takeup, t.events[j].takeup);
      std::swap(t.events[i].noop_ack, t.events[j].noop_ack);
      std::swap(t.events[i].subs, t.events[j].subs);
      return true;
    }
  }
  return false;
}

// Raise one receipt's piggyback height beyond anything announced.
bool mutate_raise_piggyback(ParsedTrace& t) {
  for (auto& ev : t.events) {
    if (ev.kind != TraceEvent::Kind::PacketIn) continue;
    ev.packet.piggyback_height = 99;
    return true;
  }
  return false;
}

// Delete one notification record.
bool mutate_drop_notify(ParsedTrace& t) {
  for (size_t i = 0; i < t.events.size(); ++i) {
    const TraceEvent& ev = t.events[i];
    if (ev.kind == TraceEvent::Kind::Notify && ev.view > 0 &&
        ev.notification.kind != Notification::Kind::New) {
      // Only safe to test when a later notification exists at the process.
      for (const auto& later : t.events) {
        if (later.kind == TraceEvent::Kind::Notify &&
            later.process == ev.process && later.view > ev.view) {
          t.events.erase(t.events.begin() + i);
          return true;
        }
      }
    }
  }
  return false;
}

bool mutate_drop_replayed_sub(ParsedTrace& t) {
  for (auto& ev : t.events) {
    if (ev.kind == TraceEvent::Kind::PacketIn && !ev.subs.empty()) {
      ev.subs.pop_back();
      return true;
    }
  }
  return false;
}

bool mutate_swap_replayed_subs(ParsedTrace& t) {
  for (auto& ev : t.events) {
    if (ev.kind == TraceEvent::Kind::PacketIn && ev.subs.size() >= 2) {
      std::swap(ev.subs.front(), ev.subs.back());
      return true;
    }
  }
  return false;
}

bool mutate_add_bogus_sub(ParsedTrace& t) {
  for (auto& ev : t.events) {
    if (ev.kind == TraceEvent::Kind::PacketIn &&
        (packet_kind(ev.packet) == PacketKind::Donation ||
         packet_kind(ev.packet) == PacketKind::CoDonation)) {
      MessageId bogus{7, {{ProcessId{"zz"}, 3}}, ProcessId{"zz"}};
      ev.subs.push_back({true, bogus, true, false});
      return true;
    }
  }
  return false;
}

struct MutationCase {
  const char* property;
  const char* name;
  Mutation mutate;
};

}  // namespace

int main() {
  auto t0 = std::chrono::steady_clock::now();

  // ---- populations -------------------------------------------------------
  std::vector<RunOutcome> causal_suite;
  std::int64_t slowest_ms = 0;
  for (const auto& sc : generate_scenarios(0xCA05A1, 200)) {
    auto s0 = std::chrono::steady_clock::now();
    causal_suite.push_back(run_one(sc));
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - s0)
                  .count();
    slowest_ms = std::max<std::int64_t>(slowest_ms, ms);
  }
  std::vector<RunOutcome> progress_suite;
  for (const auto& sc : generate_scenarios(0x9806E55, 200))
    progress_suite.push_back(run_one(sc));

  // Engineered joins: a burst of traffic immediately before the group's
  // first join, optionally preceded by a removal (to seed forwarding) and
  // followed by one (to exercise the joiner's own forwards).
  std::vector<RunOutcome> join_suite;
  {
    Xoshiro256 rng(0xD07A710);
    const char* originals[] = {"A", "B", "C", "D", "E"};
    for (int i = 0; i < 32; ++i) {
      Scenario sc;
      sc.name = "join-" + std::to_string(i);
      sc.seed = rng.next();
      sc.max_ticks = 50000;
      std::size_t n = 3 + rng.below(3);
      for (std::size_t p = 0; p < n; ++p)
        sc.roster.push_back(ProcessId{originals[p]});
      std::uint64_t tick = 1;
      bool pre_removal = rng.below(2) == 0;
      std::size_t victim = 1 + rng.below(n - 1);
      std::size_t msgs = 3 + rng.below(6);
      for (std::size_t m = 0; m < msgs; ++m) {
        Directive d;
        d.kind = Directive::Kind::Broadcast;
        d.tick = tick + rng.below(3);
        std::size_t sender = rng.below(n);
        if (pre_removal && sender == victim && rng.below(2) == 0)
          sender = victim;  // the future victim's traffic must be forwarded
        d.pid = sc.roster[sender];
        d.payload = "w" + std::to_string(m);
        sc.script.push_back(d);
      }
      tick += 2;
      if (pre_removal) {
        Directive d;
        d.kind = Directive::Kind::ProposeRemove;
        d.tick = tick;
        d.pid = sc.roster[victim];
        sc.script.push_back(d);
        Directive h;
        h.kind = Directive::Kind::Halt;
        h.tick = tick + 20 + rng.below(30);
        h.pid = sc.roster[victim];
        sc.script.push_back(h);
        tick += 1;
      }
      Directive join;
      join.kind = Directive::Kind::ProposeJoin;
      join.tick = tick;
      join.pid = ProcessId{"J1"};
      std::size_t parent = rng.below(n);
      while (pre_removal && parent == victim) parent = rng.below(n);
      join.pid2 = sc.roster[parent];
      sc.script.push_back(join);
      if (rng.below(2) == 0) {
        // a removal right behind the join keeps packets crossing the fork
        std::size_t second = rng.below(n);
        while (second == parent || (pre_removal && second == victim))
          second = (second + 1) % n;
        if (!pre_removal || sc.roster[second] != sc.roster[victim]) {
          Directive d;
          d.kind = Directive::Kind::ProposeRemove;
          d.tick = tick + 1;
          d.pid = sc.roster[second];
          sc.script.push_back(d);
          Directive h;
          h.kind = Directive::Kind::Halt;
          h.tick = tick + 25 + rng.below(25);
          h.pid = sc.roster[second];
          sc.script.push_back(h);
        }
      }
      Directive after;
      after.kind = Directive::Kind::Broadcast;
      after.tick = tick + 2;
      after.pid = sc.roster[0] == join.pid2 ? sc.roster[0] : join.pid2;
      after.payload = "post";
      sc.script.push_back(after);
      validate_scenario(sc);
      join_suite.push_back(run_one(sc));
    }
  }

  auto all_runs = [&](const std::function<void(const RunOutcome&)>& fn) {
    for (const auto& r : causal_suite) fn(r);
    for (const auto& r : progress_suite) fn(r);
  };

  // ---- criterion 1: causal order on 200 generated scenarios --------------
  {
    int pass = 0, total = 0;
    for (const auto& r : causal_suite) {
      ++total;
      if (!r.invariant_violation && verdict_passed(r, "causal-order")) ++pass;
    }
    report(1, pass == total && slowest_ms < 1000,
           "causal order holds on " + std::to_string(pass) + "/" +
               std::to_string(total) + " generated scenarios (slowest " +
               std::to_string(slowest_ms) + "ms)");
  }

  // ---- criterion 2: progress and quiescence -------------------------------
  {
    int quiescent = 0, progress_ok = 0, non_timeout = 0, total = 0;
    int logs_agree = 0, log_checks = 0;
    for (const auto& r : progress_suite) {
      ++total;
      if (r.invariant_violation) continue;
      if (r.sim.quiescent) ++quiescent;
      const Verdict* v = r.report.find("progress");
      if (v && v->result != Verdict::Result::Inconclusive) {
        ++non_timeout;
        if (!v->failed()) ++progress_ok;
      }
      if (r.sim.quiescent) {
        // Non-halting members must agree on the message multiset.
        std::set<ProcessId> halted;
        for (const auto& ev : r.trace.events)
          if (ev.kind == TraceEvent::Kind::Halt) halted.insert(ev.process);
        std::optional<std::multiset<std::pair<ProcessId, std::string>>> ref;
        bool agree = true;
        for (const auto& [pid, log] : r.sim.logs) {
          if (halted.count(pid)) continue;
          std::multiset<std::pair<ProcessId, std::string>> entries;
          for (const auto& e : log.entries)
            if (e.kind == DeliveryLog::Entry::Kind::Message)
              entries.insert({e.pid, e.payload});
          if (!ref)
            ref = std::move(entries);
          else if (*ref != entries)
            agree = false;
        }
        ++log_checks;
        if (agree) ++logs_agree;
      }
    }
    bool pass = progress_ok == non_timeout && quiescent * 100 >= total * 95 &&
                logs_agree == log_checks;
    report(2, pass,
           "progress holds on " + std::to_string(progress_ok) + "/" +
               std::to_string(non_timeout) + " quiescent runs; " +
               std::to_string(quiescent) + "/" + std::to_string(total) +
               " reached quiescence; logs agree on " +
               std::to_string(logs_agree) + "/" + std::to_string(log_checks));
  }

  // ---- criterion 3: receipt agreement and install-flush evidence ----------
  {
    int pass = 0, total = 0;
    all_runs([&](const RunOutcome& r) {
      ++total;
      if (!r.invariant_violation && verdict_passed(r, "receipt-agreement") &&
          verdict_passed(r, "install-flush"))
        ++pass;
    });
    report(3, pass == total,
           "receipt agreement and install-flush evidence on " +
               std::to_string(pass) + "/" + std::to_string(total) + " runs");
  }

  // ---- criterion 4: runtime state assertions never fire -------------------
  {
    int violations = 0, total = 0;
    std::string first;
    all_runs([&](const RunOutcome& r) {
      ++total;
      if (r.invariant_violation) {
        ++violations;
        if (first.empty()) first = r.violation_text;
      }
    });
    for (const auto& r : join_suite) {
      ++total;
      if (r.invariant_violation) ++violations;
    }
    report(4, violations == 0,
           violations == 0
               ? "state and side-effect assertions quiet across " +
                     std::to_string(total) + " runs"
               : "first violation: " + first);
  }

  // ---- criterion 5: donation replay matches the wire record ---------------
  {
    int pass = 0, total = 0, nonempty = 0;
    // Every flavor of replayed clone must occur somewhere, or the
    // correspondence assertion would be vacuous for that flavor.
    long don_msg = 0, don_ack = 0, codon_msg = 0, codon_ack = 0,
         codon_self = 0;
    auto tally_categories = [&](const RunOutcome& r) {
      if (r.invariant_violation) return;
      DonationOracle oracle = donation_replay_oracle(r.trace);
      if (!oracle.has_join) return;
      for (const auto& donor : oracle.donors) {
        for (const auto& [is_message, id] : donor.donation_subs)
          (is_message ? don_msg : don_ack) += 1;
        for (const auto& [is_message, id] : donor.codonation_subs) {
          if (!is_message) {
            ++codon_ack;
            continue;
          }
          bool self_clone = false;
          for (const auto& ev : r.trace.events)
            if (ev.kind == TraceEvent::Kind::Queue &&
                ev.process == oracle.joiner &&
                packet_kind(ev.packet) == PacketKind::Msg &&
                message_id(std::get<MsgPacket>(ev.packet.body).msg) == id)
              self_clone = true;
          (self_clone ? codon_self : codon_msg) += 1;
        }
      }
    };
    for (const auto& r : join_suite) {
      ++total;
      if (r.invariant_violation) continue;
      if (!verdict_passed(r, "donation-replay")) continue;
      ++pass;
      DonationOracle oracle = donation_replay_oracle(r.trace);
      for (const auto& donor : oracle.donors)
        if (!donor.donation_subs.empty() || !donor.codonation_subs.empty()) {
          ++nonempty;
          break;
        }
      tally_categories(r);
    }
    all_runs(tally_categories);
    bool covered = don_msg > 0 && don_ack > 0 && codon_msg > 0 &&
                   codon_ack > 0 && codon_self > 0;
    bool pass_all = pass == total && total >= 30 && nonempty > 0 && covered;
    report(5, pass_all,
           "replayed joins match the untimely wire record on " +
               std::to_string(pass) + "/" + std::to_string(total) +
               " engineered scenarios (" + std::to_string(nonempty) +
               " with in-flight traffic; clone kinds " +
               std::to_string(don_msg) + "/" + std::to_string(don_ack) + "/" +
               std::to_string(codon_msg) + "/" + std::to_string(codon_ack) +
               "/" + std::to_string(codon_self) + ")");
  }

  // ---- criterion 6: unique take-up and effective routes --------------------
  {
    int pass = 0, total = 0;
    all_runs([&](const RunOutcome& r) {
      ++total;
      if (!r.invariant_violation && verdict_passed(r, "unique-takeup")) ++pass;
    });
    for (const auto& r : join_suite) {
      ++total;
      if (!r.invariant_violation && verdict_passed(r, "unique-takeup")) ++pass;
    }
    report(6, pass == total,
           "unique take-up and route monotonicity on " + std::to_string(pass) +
               "/" + std::to_string(total) + " runs");
  }

  // ---- criterion 7: checker sensitivity to corrupted traces ---------------
  {
    std::vector<MutationCase> cases = {
        {"causal-order", "swapped deliveries", mutate_swap_deliveries},
        {"causal-order", "dropped delivery", mutate_drop_delivery},
        {"causal-order", "dropped predecessor", mutate_drop_first_of_pair},
        {"progress", "dropped delivery", mutate_drop_delivery},
        {"progress", "silenced process", mutate_drop_all_deliveries_at_one_process},
        {"progress", "removed halt record", mutate_unhalt},
        {"receipt-agreement", "dropped receipts", mutate_drop_receipts},
        {"receipt-agreement", "dropped receipts elsewhere", mutate_drop_receipts_second},
        {"receipt-agreement", "forged receipt", mutate_forge_receipt},
        {"install-flush", "dropped flush evidence", mutate_drop_flush_evidence},
        {"install-flush", "inflated installation gap", mutate_inflate_gap},
        {"install-flush", "dropped donated flush", mutate_drop_donated_flush},
        {"unique-takeup", "doubled take-up", mutate_double_takeup},
        {"unique-takeup", "cleared forwarder take-up", mutate_clear_sender_takeup},
        {"unique-takeup", "retargeted take-up", mutate_retarget_takeup},
        {"model-conformance", "reordered channel", mutate_reorder_channel},
        {"model-conformance", "inflated piggyback", mutate_raise_piggyback},
        {"model-conformance", "dropped notification", mutate_drop_notify},
        {"donation-replay", "dropped replay", mutate_drop_replayed_sub},
        {"donation-replay", "reordered replay", mutate_swap_replayed_subs},
        {"donation-replay", "injected replay", mutate_add_bogus_sub},
    };
    // Three corruptions per checker, each of which must fail with a
    // counterexample on some host trace it applies to.
    std::map<std::string, int> fired, needed;
    for (const auto& c : cases) needed[c.property] += 1;
    int detected = 0;
    std::string miss;
    for (const auto& c : cases) {
      bool caught = false;
      for (const auto& pool : {&join_suite, &causal_suite, &progress_suite}) {
        for (const auto& r : *pool) {
          if (r.invariant_violation || !r.report.all_hard_pass()) continue;
          ParsedTrace copy = r.trace;
          if (!c.mutate(copy)) continue;
          ParsedTrace mutated = reparse(copy);
          CheckReport rep = run_all_checks(mutated);
          const Verdict* v = rep.find(c.property);
          if (v && v->failed() &&
              (!v->evidence.empty() || !v->detail.empty())) {
            caught = true;
            break;
          }
        }
        if (caught) break;
      }
      if (caught) {
        ++detected;
        fired[c.property] += 1;
      } else if (miss.empty()) {
        miss = std::string(c.property) + "/" + c.name;
      }
    }
    bool pass = detected == static_cast<int>(cases.size());
    for (const auto& [prop, n] : needed)
      if (fired[prop] != n) pass = false;
    report(7, pass,
           pass ? "every corrupted trace was caught with a counterexample (" +
                      std::to_string(detected) + " corruptions, 3 per checker)"
                : "undetected corruption: " + miss);
  }

  // ---- criterion 8: byte-identical reruns ----------------------------------
  {
    int identical = 0, total = 0;
    for (const auto& sc : generate_scenarios(0xDE7E12, 20)) {
      ++total;
      SimResult a = run_scenario_sim(sc);
      SimResult b = run_scenario_sim(sc);
      if (a.trace == b.trace) ++identical;
    }
    report(8, identical == total,
           "rerun traces byte-identical on " + std::to_string(identical) +
               "/" + std::to_string(total) + " spot checks");
  }

  // ---- criterion 9: side-effect branch coverage ----------------------------
  {
    auto results = cbcast::testing::run_side_effect_branch_cases();
    int ok = 0;
    std::string first;
    for (const auto& r : results) {
      if (r.pass) ++ok;
      else if (first.empty()) first = r.name + ": " + r.note;
    }
    bool pass = ok == static_cast<int>(results.size()) && results.size() >= 14;
    report(9, pass,
           pass ? "all " + std::to_string(results.size()) +
                      " side-effect branches emit the exact packet sequence"
                : first);
  }

  // ---- criterion 10: wall-clock budget --------------------------------------
  {
    auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
    report(10, elapsed < 300,
           "full suite took " + std::to_string(elapsed) + "s (budget 300s)");
  }

  return failures == 0 ? 0 : 1;
}
