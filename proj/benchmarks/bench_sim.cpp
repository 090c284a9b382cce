// Throughput benchmarks for the simulator and the trace checkers.

#include <benchmark/benchmark.h>

#include "cbcast/checker.hpp"
#include "cbcast/scenario.hpp"
#include "cbcast/simnet.hpp"

namespace {

cbcast::Scenario dense_scenario(std::size_t members, std::size_t messages) {
  using namespace cbcast;
  GeneratorLimits limits;
  limits.max_processes = members;
  limits.max_broadcasts = messages;
  return generate_scenarios(1234, 1, limits)[0];
}

void BM_SimulateScenario(benchmark::State& state) {
  auto sc = dense_scenario(static_cast<std::size_t>(state.range(0)), 40);
  std::uint64_t events = 0;
  for (auto _ : state) {
    cbcast::SimResult r = cbcast::run_scenario_sim(sc);
    events += r.trace.size();
    benchmark::DoNotOptimize(r.trace.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(events));
}
BENCHMARK(BM_SimulateScenario)->Arg(3)->Arg(6);

void BM_CheckTrace(benchmark::State& state) {
  auto sc = dense_scenario(6, 40);
  cbcast::SimResult r = cbcast::run_scenario_sim(sc);
  cbcast::ParsedTrace trace = cbcast::parse_trace(r.trace);
  for (auto _ : state) {
    cbcast::CheckReport report = cbcast::run_all_checks(trace);
    benchmark::DoNotOptimize(report.verdicts.data());
  }
}
BENCHMARK(BM_CheckTrace);

void BM_ParseTrace(benchmark::State& state) {
  auto sc = dense_scenario(6, 40);
  cbcast::SimResult r = cbcast::run_scenario_sim(sc);
  for (auto _ : state) {
    cbcast::ParsedTrace trace = cbcast::parse_trace(r.trace);
    benchmark::DoNotOptimize(trace.events.data());
  }
  state.SetBytesProcessed(
      static_cast<std::int64_t>(state.iterations() * r.trace.size()));
}
BENCHMARK(BM_ParseTrace);

}  // namespace

BENCHMARK_MAIN();
