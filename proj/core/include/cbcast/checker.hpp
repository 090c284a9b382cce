#pragma once

#include "cbcast/gms.hpp"
#include "cbcast/trace.hpp"

namespace cbcast {

struct Verdict {
  enum class Result { Pass, Fail, Inconclusive, Info };
  std::string property;
  Result result = Result::Pass;
  std::string detail;
  std::vector<std::uint64_t> evidence;  // seqs of the counterexample events
  bool hard = true;

  bool failed() const { return result == Result::Fail; }
};

struct CheckReport {
  std::vector<Verdict> verdicts;
  bool all_hard_pass() const;
  // Line-delimited property/result/counterexample records.
  std::string render() const;
  const Verdict* find(std::string_view property) const;
};

// Trace checks. All are pure functions of the parsed trace; rerunning yields
// identical verdicts. Every FAIL carries a counterexample.

// Deliveries respect causal order: everything the originator broadcast or
// knew before a message must be familiar to each receiver by its delivery.
Verdict check_causal_order(const ParsedTrace& trace);
// Quiescent runs only: every message from a non-halting process ends up
// familiar to every non-halting process. Timed-out runs are INCONCLUSIVE.
Verdict check_progress(const ParsedTrace& trace);
// A message received by a process that installs a view with no installation
// gap is received by every installer of that view.
Verdict check_receipt_agreement(const ParsedTrace& trace);
// Installing view v with gap g requires flush evidence at height v+g from
// every member of view v+g (flush packets or donated flush heights).
Verdict check_install_flush(const ParsedTrace& trace);
// Each message enters a receive set at most once per process, its effective
// route is connected, and forwarder removal views strictly increase.
Verdict check_unique_takeup(const ParsedTrace& trace);
// The mechanically checkable rules of the network model: views and contents,
// channel FIFO, notification order, liveness, piggyback, self-channel
// ordering, and the conforming fault couplings.
Verdict check_model_conformance(const ParsedTrace& trace);
// The replayed sub-transactions of the first join's donation exchange match
// the untimely packets recorded on the wire, one-to-one and in order.
Verdict check_donation_replay(const ParsedTrace& trace);
// Receive counters track send indexes in lockstep on original-pair and
// self channels.
Verdict check_counting_lockstep(const ParsedTrace& trace);
// Flush and ghost heights arrive strictly increasing on those channels.
Verdict check_flush_lockstep(const ParsedTrace& trace);
// Deliveries per (process, view, originator) are gapless from 1.
Verdict check_gapless_delivery(const ParsedTrace& trace);
// Report-only: installers of a view delivered identical sets of messages
// from the view before it.
Verdict check_view_agreement(const ParsedTrace& trace);

CheckReport run_all_checks(const ParsedTrace& trace);

// Expected replay lists for the first join, computed from the omniscient
// channel record. Exposed so the dedicated suite can assert non-triviality.
struct DonationExpectation {
  ProcessId donor;
  bool donation_processed = false;
  bool codonation_processed = false;
  std::vector<std::pair<bool, MessageId>> donation_subs;
  std::vector<std::pair<bool, MessageId>> codonation_subs;
  std::vector<std::pair<bool, MessageId>> actual_donation_subs;
  std::vector<std::pair<bool, MessageId>> actual_codonation_subs;
};

struct DonationOracle {
  bool has_join = false;
  ViewId crit_view = 0;
  ProcessId joiner;
  ProcessId parent;
  std::vector<DonationExpectation> donors;
};

DonationOracle donation_replay_oracle(const ParsedTrace& trace);

}  // namespace cbcast
