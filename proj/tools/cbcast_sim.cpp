// Scenario runner: simulates a causal-multicast group over a deterministic
// fault-injecting network and optionally validates the recorded trace
// against the protocol's correctness properties.
//
// Exit codes: 0 all checks pass (or trace-only run), 1 a property failed or
// a runtime invariant fired, 2 input or validation error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cbcast/checker.hpp"
#include "cbcast/simnet.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

int run_checks(const std::string& trace_text, const std::string& verdict_out,
               bool quiet) {
  cbcast::ParsedTrace trace = cbcast::parse_trace(trace_text);
  cbcast::CheckReport report = cbcast::run_all_checks(trace);
  std::string rendered = report.render();
  if (!verdict_out.empty()) write_file(verdict_out, rendered);
  if (!quiet) std::cout << rendered;
  return report.all_hard_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic causal-multicast group simulator"};

  std::string scenario_path;
  std::string trace_out;
  std::string verdict_out;
  std::string check_trace_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::uint64_t max_ticks = 0;
  bool max_ticks_set = false;
  bool check = false;
  bool quiet = false;
  std::size_t generate = 0;
  cbcast::GeneratorLimits limits;

  app.add_option("--scenario", scenario_path, "scenario file to run");
  app.add_option("--seed", seed, "override the scenario seed")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_option("--max-ticks", max_ticks, "override the tick budget")
      ->each([&](const std::string&) { max_ticks_set = true; });
  app.add_option("--trace-out", trace_out, "write the trace to this path");
  app.add_flag("--check", check, "run all trace checks after the run");
  app.add_option("--verdict-out", verdict_out, "write the verdict report");
  app.add_option("--check-trace", check_trace_path,
                 "skip simulation; check an existing trace file");
  app.add_option("--generate", generate,
                 "emit this many random conforming scenarios");
  app.add_option("--out-dir", out_dir, "directory for generated scenarios");
  app.add_option("--max-procs", limits.max_processes,
                 "generator: max processes");
  app.add_option("--max-views", limits.max_view_changes,
                 "generator: max view changes");
  app.add_option("--max-msgs", limits.max_broadcasts,
                 "generator: max broadcasts");
  app.add_flag("--quiet", quiet, "suppress report output on stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate > 0) {
      auto scenarios =
          cbcast::generate_scenarios(seed_set ? seed : 1, generate, limits);
      std::filesystem::create_directories(out_dir);
      for (const auto& sc : scenarios) {
        cbcast::validate_scenario(sc);
        write_file(out_dir + "/" + sc.name + ".scn",
                   cbcast::render_scenario(sc));
      }
      if (!quiet)
        std::cout << "generated " << scenarios.size() << " scenarios in "
                  << out_dir << "\n";
      return 0;
    }

    if (!check_trace_path.empty())
      return run_checks(read_file(check_trace_path), verdict_out, quiet);

    if (scenario_path.empty()) {
      std::cerr << "error: --scenario, --check-trace or --generate required\n";
      return 2;
    }

    cbcast::Scenario sc = cbcast::parse_scenario(read_file(scenario_path));
    cbcast::SimOptions opt;
    if (seed_set) opt.seed = seed;
    if (max_ticks_set) opt.max_ticks = max_ticks;

    cbcast::SimResult result;
    try {
      result = cbcast::run_scenario_sim(sc, opt);
    } catch (const cbcast::SimInvariantViolation& e) {
      std::cerr << "invariant violation: " << e.what() << "\n";
      return 1;
    }
    if (!trace_out.empty()) write_file(trace_out, result.trace);
    if (!quiet) {
      std::cout << (result.quiescent ? "quiescent" : "timeout") << " after "
                << result.ticks << " ticks\n";
      for (const auto& a : result.anomalies)
        std::cout << "anomaly: " << a << "\n";
    }
    if (check) return run_checks(result.trace, verdict_out, quiet);
    return 0;
  } catch (const cbcast::ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return 2;
  } catch (const cbcast::TraceError& e) {
    std::cerr << "trace error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
