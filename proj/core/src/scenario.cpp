#include "cbcast/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "cbcast/encoding.hpp"
#include "cbcast/rng.hpp"

namespace cbcast {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::uint64_t parse_u64(const std::string& tok, const char* what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ScenarioError(std::string("bad ") + what + ": " + tok);
  return v;
}

bool valid_pid_token(const std::string& tok) {
  if (tok.empty()) return false;
  for (char c : tok) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
              (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

ProcessId parse_pid_token(const std::string& tok) {
  if (!valid_pid_token(tok)) throw ScenarioError("bad process id: " + tok);
  return ProcessId{tok};
}

// Proposals in (tick, file order); that order defines the view sequence.
std::vector<const Directive*> ordered_script(const Scenario& sc) {
  std::vector<const Directive*> out;
  out.reserve(sc.script.size());
  for (const auto& d : sc.script) out.push_back(&d);
  std::stable_sort(out.begin(), out.end(),
                   [](const Directive* a, const Directive* b) {
                     return a->tick < b->tick;
                   });
  return out;
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
  Scenario sc;
  bool saw_roster = false;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    auto fail = [&](const std::string& msg) {
      throw ScenarioError("line " + std::to_string(lineno) + ": " + msg);
    };
    try {
      if (toks[0] == "name" && toks.size() == 2) {
        sc.name = toks[1];
      } else if (toks[0] == "seed" && toks.size() == 2) {
        sc.seed = parse_u64(toks[1], "seed");
      } else if (toks[0] == "max_ticks" && toks.size() == 2) {
        sc.max_ticks = parse_u64(toks[1], "max_ticks");
      } else if (toks[0] == "roster" && toks.size() >= 2) {
        for (size_t i = 1; i < toks.size(); ++i)
          sc.roster.push_back(parse_pid_token(toks[i]));
        saw_roster = true;
      } else if (toks[0] == "at" && toks.size() >= 3) {
        Directive d;
        d.tick = parse_u64(toks[1], "tick");
        const std::string& verb = toks[2];
        if (verb == "broadcast" && toks.size() == 5) {
          d.kind = Directive::Kind::Broadcast;
          d.pid = parse_pid_token(toks[3]);
          d.payload = codec::pct_decode(toks[4]);
        } else if (verb == "join" && toks.size() == 5) {
          d.kind = Directive::Kind::ProposeJoin;
          d.pid = parse_pid_token(toks[3]);
          d.pid2 = parse_pid_token(toks[4]);
        } else if (verb == "remove" && toks.size() == 4) {
          d.kind = Directive::Kind::ProposeRemove;
          d.pid = parse_pid_token(toks[3]);
        } else if (verb == "halt" && toks.size() == 4) {
          d.kind = Directive::Kind::Halt;
          d.pid = parse_pid_token(toks[3]);
        } else if (verb == "drop_packets" && toks.size() == 6) {
          d.kind = Directive::Kind::DropPackets;
          d.pid = parse_pid_token(toks[3]);
          d.pid2 = parse_pid_token(toks[4]);
          d.from_ordinal = parse_u64(toks[5], "ordinal");
          if (d.from_ordinal == 0) fail("drop_packets ordinal is 1-based");
        } else if (verb == "drop_notification" && toks.size() == 5) {
          d.kind = Directive::Kind::DropNotification;
          d.pid = parse_pid_token(toks[3]);
          d.view = parse_u64(toks[4], "view");
        } else {
          fail("unknown or malformed directive: " + verb);
        }
        sc.script.push_back(std::move(d));
      } else {
        fail("unknown line: " + toks[0]);
      }
    } catch (const codec::CodecError& e) {
      fail(e.what());
    }
  }
  if (!saw_roster || sc.roster.empty()) throw ScenarioError("missing roster");
  std::set<ProcessId> seen;
  for (const auto& pid : sc.roster)
    if (!seen.insert(pid).second)
      throw ScenarioError("duplicate roster id " + pid.id);
  return sc;
}

std::string render_scenario(const Scenario& sc) {
  std::string out;
  out += "name " + sc.name + "\n";
  out += "seed " + std::to_string(sc.seed) + "\n";
  out += "max_ticks " + std::to_string(sc.max_ticks) + "\n";
  out += "roster";
  for (const auto& pid : sc.roster) out += " " + pid.id;
  out += "\n";
  for (const auto& d : sc.script) {
    out += "at " + std::to_string(d.tick) + " ";
    switch (d.kind) {
      case Directive::Kind::Broadcast:
        out += "broadcast " + d.pid.id + " " + codec::pct_encode(d.payload);
        break;
      case Directive::Kind::ProposeJoin:
        out += "join " + d.pid.id + " " + d.pid2.id;
        break;
      case Directive::Kind::ProposeRemove:
        out += "remove " + d.pid.id;
        break;
      case Directive::Kind::Halt:
        out += "halt " + d.pid.id;
        break;
      case Directive::Kind::DropPackets:
        out += "drop_packets " + d.pid.id + " " + d.pid2.id + " " +
               std::to_string(d.from_ordinal);
        break;
      case Directive::Kind::DropNotification:
        out += "drop_notification " + d.pid.id + " " +
               std::to_string(d.view);
        break;
    }
    out += "\n";
  }
  return out;
}

ViewSequence validate_scenario(const Scenario& sc) {
  std::set<ProcessId> roster(sc.roster.begin(), sc.roster.end());
  GmsOracle gms(roster);
  std::set<ProcessId> halted_by_plan;
  std::set<ProcessId> removed;

  auto ordered = ordered_script(sc);
  for (const Directive* d : ordered) {
    switch (d->kind) {
      case Directive::Kind::ProposeJoin:
        gms.propose_join(d->pid, d->pid2);
        break;
      case Directive::Kind::ProposeRemove:
        gms.propose_remove(d->pid);
        removed.insert(d->pid);
        break;
      case Directive::Kind::Halt:
        halted_by_plan.insert(d->pid);
        break;
      default:
        break;
    }
  }
  const ViewSequence& seq = gms.views();

  for (const Directive* d : ordered) {
    switch (d->kind) {
      case Directive::Kind::Broadcast:
        if (!seq.ever_member(d->pid))
          throw ScenarioError("broadcast from unknown process " + d->pid.id);
        break;
      case Directive::Kind::Halt:
        // Halts are only conforming for removed processes.
        if (!removed.count(d->pid))
          throw ScenarioError("halt of never-removed process " + d->pid.id);
        break;
      case Directive::Kind::DropNotification: {
        if (!halted_by_plan.count(d->pid))
          throw ScenarioError("notification drop at non-halting process " +
                              d->pid.id);
        if (d->view == 0 || d->view > seq.last_view())
          throw ScenarioError("notification drop for unknown view " +
                              std::to_string(d->view));
        bool entitled = seq.members[d->view - 1].count(d->pid) ||
                        seq.join_view(d->pid) == d->view;
        if (!entitled)
          throw ScenarioError("process " + d->pid.id +
                              " is not entitled to view " +
                              std::to_string(d->view));
        break;
      }
      case Directive::Kind::DropPackets: {
        if (!seq.ever_member(d->pid) || !seq.ever_member(d->pid2))
          throw ScenarioError("packet drop on unknown channel");
        bool src_removed = removed.count(d->pid) > 0;
        bool tgt_halts = removed.count(d->pid2) > 0;
        if (!src_removed && !tgt_halts)
          throw ScenarioError(
              "packet drop on channel " + d->pid.id + "->" + d->pid2.id +
              " whose source is never removed and whose target never halts");
        break;
      }
      default:
        break;
    }
  }
  return seq;
}

namespace {

const char* kOriginalNames[] = {"A", "B", "C", "D", "E", "F"};
const char* kJoinerNames[] = {"J1", "J2", "J3", "J4",
                              "J5", "J6", "J7", "J8"};

}  // namespace

std::vector<Scenario> generate_scenarios(std::uint64_t seed, std::size_t count,
                                         const GeneratorLimits& limits) {
  std::vector<Scenario> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Xoshiro256 rng(seed ^ (0x5DEECE66DULL * (i + 1)));
    Scenario sc;
    sc.name = "gen-" + std::to_string(seed) + "-" + std::to_string(i);
    sc.seed = rng.next();
    sc.max_ticks = 50000;

    std::size_t max_procs = std::min<std::size_t>(limits.max_processes, 6);
    std::size_t roster_n = 2 + rng.below(std::max<std::size_t>(
                                   1, std::min<std::size_t>(max_procs, 6) - 1));
    for (std::size_t p = 0; p < roster_n; ++p)
      sc.roster.push_back(ProcessId{kOriginalNames[p]});

    std::vector<ProcessId> current(sc.roster);
    std::size_t joiner_next = 0;
    std::size_t changes =
        rng.below(std::min<std::size_t>(limits.max_view_changes, 8) + 1);
    std::size_t broadcasts = 1 + rng.below(std::min<std::size_t>(
                                     limits.max_broadcasts, 50));

    // Plan the change sequence first. A join's parent must survive the whole
    // scenario: a parent that halts before forking leaves a member that never
    // runs and never flushes, which is exactly the non-conforming deadlock
    // the fault constraints exist to exclude. The first roster member is
    // never removed so an eligible parent always exists.
    struct Change {
      bool join;
      ProcessId pid;
      std::size_t parent_choice;  // resolved after removals are known
    };
    std::vector<Change> plan;
    std::vector<std::set<ProcessId>> plan_members;
    std::set<ProcessId> ever_removed;
    for (std::size_t c = 0; c < changes; ++c) {
      // The process cap counts every identity the scenario ever uses.
      bool can_join = joiner_next < 8 && roster_n + joiner_next < max_procs;
      bool can_remove = current.size() > 1;
      bool join = can_join && (!can_remove || rng.below(2) == 0);
      if (join) {
        ProcessId pid{kJoinerNames[joiner_next++]};
        plan_members.emplace_back(current.begin(), current.end());
        plan.push_back({true, pid, static_cast<std::size_t>(rng.below(64))});
        current.push_back(pid);
      } else if (can_remove) {
        std::size_t victim = 1 + rng.below(current.size() - 1);
        // keep current[0] (the anchor) alive
        ProcessId pid = current[victim];
        plan_members.emplace_back();
        plan.push_back({false, pid, 0});
        ever_removed.insert(pid);
        current.erase(current.begin() + victim);
      }
    }

    std::uint64_t tick = 1;
    std::size_t sent = 0;
    std::vector<std::uint64_t> removal_ticks;
    std::vector<ProcessId> removal_pids;
    std::vector<ProcessId> live(sc.roster);

    for (std::size_t c = 0; c < plan.size(); ++c) {
      // Burst of broadcasts first so the change lands with packets in flight.
      std::size_t burst = rng.below(5);
      for (std::size_t b = 0; b < burst && sent < broadcasts; ++b, ++sent) {
        Directive d;
        d.tick = tick + rng.below(2);
        d.kind = Directive::Kind::Broadcast;
        d.pid = live[rng.below(live.size())];
        d.payload = "m" + std::to_string(sent);
        sc.script.push_back(d);
      }
      tick += 1 + rng.below(3);
      if (plan[c].join) {
        std::vector<ProcessId> eligible;
        for (const auto& m : plan_members[c])
          if (!ever_removed.count(m)) eligible.push_back(m);
        Directive d;
        d.tick = tick;
        d.kind = Directive::Kind::ProposeJoin;
        d.pid = plan[c].pid;
        d.pid2 = eligible[plan[c].parent_choice % eligible.size()];
        sc.script.push_back(d);
        live.push_back(d.pid);
      } else {
        Directive d;
        d.tick = tick;
        d.kind = Directive::Kind::ProposeRemove;
        d.pid = plan[c].pid;
        sc.script.push_back(d);
        removal_ticks.push_back(tick);
        removal_pids.push_back(d.pid);
        live.erase(std::find(live.begin(), live.end(), d.pid));
      }
      tick += 1 + rng.below(20);
    }

    while (sent < broadcasts) {
      Directive d;
      d.tick = tick + rng.below(8);
      d.kind = Directive::Kind::Broadcast;
      d.pid = current[rng.below(current.size())];
      d.payload = "m" + std::to_string(sent);
      sc.script.push_back(d);
      ++sent;
    }

    // Conforming faults: every removed process halts. Occasionally its
    // channels start dropping (either direction is allowed once one end is
    // doomed) or one of its pending notifications is suppressed.
    for (std::size_t r = 0; r < removal_pids.size(); ++r) {
      Directive h;
      h.kind = Directive::Kind::Halt;
      h.pid = removal_pids[r];
      h.tick = removal_ticks[r] + 1 + rng.below(30);
      sc.script.push_back(h);
      if (rng.below(4) == 0 && !current.empty()) {
        Directive dp;
        dp.kind = Directive::Kind::DropPackets;
        dp.tick = h.tick;
        dp.pid = removal_pids[r];
        dp.pid2 = current[rng.below(current.size())];
        dp.from_ordinal = 1 + rng.below(6);
        sc.script.push_back(dp);
      }
      if (rng.below(5) == 0 && !current.empty()) {
        Directive dp;
        dp.kind = Directive::Kind::DropPackets;
        dp.tick = removal_ticks[r];
        dp.pid = current[rng.below(current.size())];
        dp.pid2 = removal_pids[r];  // target halts
        dp.from_ordinal = 1 + rng.below(8);
        sc.script.push_back(dp);
      }
      if (rng.below(5) == 0) {
        // Suppress the victim's own death record; it halts by plan anyway.
        Directive dn;
        dn.kind = Directive::Kind::DropNotification;
        dn.tick = removal_ticks[r];
        dn.pid = removal_pids[r];
        for (std::size_t c = 0; c < plan.size(); ++c) {
          if (!plan[c].join && plan[c].pid == removal_pids[r])
            dn.view = static_cast<ViewId>(c + 1);
        }
        sc.script.push_back(dn);
      }
    }

    out.push_back(std::move(sc));
  }
  return out;
}

}  // namespace cbcast
