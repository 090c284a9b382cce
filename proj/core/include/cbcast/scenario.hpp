#pragma once

#include <string>
#include <vector>

#include "cbcast/gms.hpp"

namespace cbcast {

// One timed scenario directive. Ticks say when the directive is handed to the
// simulator; processing of its consequences is scheduled like everything else.
struct Directive {
  enum class Kind {
    Broadcast,
    ProposeJoin,
    ProposeRemove,
    Halt,
    DropPackets,
    DropNotification
  };
  std::uint64_t tick = 0;
  Kind kind = Kind::Broadcast;
  ProcessId pid;          // broadcaster / joiner / removed / halted / drop src
  ProcessId pid2;         // join parent / drop target
  std::string payload;    // broadcast only
  std::uint64_t from_ordinal = 0;  // drop_packets: 1-based packet ordinal
  ViewId view = 0;        // drop_notification
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  std::vector<ProcessId> roster;
  std::vector<Directive> script;  // kept in file order
  std::uint64_t max_ticks = 50000;
};

// Parses the flat key-value scenario format (see docs/scenario-format.md).
Scenario parse_scenario(std::string_view text);
// Canonical rendering; parse(render(s)) == s.
std::string render_scenario(const Scenario& sc);

// Rejects scenarios that violate the conforming-fault constraints: every
// notification drop needs a scheduled halt, every halt needs a removal, and
// packet drops may only hit channels with a removed source or halting target.
// Throws ScenarioError. Returns the view sequence implied by the proposals.
ViewSequence validate_scenario(const Scenario& sc);

struct GeneratorLimits {
  std::size_t max_processes = 6;
  std::size_t max_view_changes = 8;
  std::size_t max_broadcasts = 50;
};

// Deterministic scenario generation: identical (seed, count, limits) yield
// identical scenarios. Every generated scenario passes validate_scenario.
// Joins are biased to land right after a burst of broadcasts so that packets
// are typically still in flight at the join.
std::vector<Scenario> generate_scenarios(std::uint64_t seed, std::size_t count,
                                         const GeneratorLimits& limits = {});

}  // namespace cbcast
