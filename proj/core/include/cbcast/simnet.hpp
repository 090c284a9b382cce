#pragma once

#include <optional>

#include "cbcast/protocol.hpp"
#include "cbcast/scenario.hpp"
#include "cbcast/trace.hpp"

namespace cbcast {

// A protocol-level invariant observed to fail at runtime. Conforming runs
// must never throw this; the acceptance suite counts any occurrence as a
// failure.
struct SimInvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimOptions {
  std::optional<std::uint64_t> seed;       // overrides the scenario seed
  std::optional<std::uint64_t> max_ticks;  // overrides the scenario budget
  std::uint64_t main_launch_delay = 0;     // ticks between start and Main
};

struct SimResult {
  bool quiescent = false;
  std::uint64_t ticks = 0;
  std::string trace;
  std::map<ProcessId, DeliveryLog> logs;
  std::map<ProcessId, ProcessState> states;
  std::vector<std::string> anomalies;  // stuck obligations at quiescence
  std::uint64_t discards = 0;
  std::uint64_t noop_acks = 0;
};

// Validates the scenario, then runs it to quiescence or tick exhaustion.
// Identical (scenario, seed) pairs produce byte-identical traces.
SimResult run_scenario_sim(const Scenario& sc, const SimOptions& opt = {});

}  // namespace cbcast
