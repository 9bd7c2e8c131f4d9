// Scenario driver that performs no real interaction: it walks a unit's
// steps for exactly target_duration_s and reports configurable traffic.
// Step timestamps are nominal CLOCK_MONOTONIC milliseconds, which keeps
// runs reproducible.

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "ecotrace/error.hpp"
#include "ecotrace/protocol.hpp"
#include "ecotrace/sampling.hpp"
#include "ecotrace/scenario.hpp"

namespace {

using namespace ecotrace;

void emit(const std::string& line) {
  std::cout << line << '\n';
  std::cout.flush();
}

void sleep_until_ms(Millis t) {
  std::this_thread::sleep_until(std::chrono::steady_clock::time_point(t));
}

/// Bumps a counter persisted in `path` and returns the new value.
int bump_invocation(const std::string& path) {
  int count = 0;
  {
    std::ifstream in(path);
    in >> count;
  }
  ++count;
  std::ofstream(path, std::ios::trunc) << count;
  return count;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecotrace mock driver"};
  std::string scenario_path;
  std::uint64_t bytes_in = 0;
  std::uint64_t bytes_out = 0;
  std::vector<std::string> net_overrides;
  bool no_net = false;
  std::string fail_unit;
  int fail_invocation = 0;
  std::string state_file;
  std::string violate;
  bool hang = false;
  double duration_skew = 1.0;

  app.add_option("--scenario", scenario_path, "Scenario file with the unit definitions")->required();
  app.add_option("--bytes-in", bytes_in, "NET bytes_in reported per run");
  app.add_option("--bytes-out", bytes_out, "NET bytes_out reported per run");
  app.add_option("--net", net_overrides, "Per-configuration totals: <label>=<in>:<out>");
  app.add_flag("--no-net", no_net, "Do not emit NET lines");
  app.add_option("--fail-unit", fail_unit, "Report ERR when asked to run this unit");
  app.add_option("--fail-invocation", fail_invocation, "Report ERR on the n-th invocation");
  app.add_option("--state-file", state_file, "Invocation counter for --fail-invocation");
  app.add_option("--violate", violate, "Break the protocol: end-without-start | no-done | garbage");
  app.add_flag("--hang", hang, "Never finish a run");
  app.add_option("--duration-skew", duration_skew, "Scale actual run durations");
  CLI11_PARSE(app, argc, argv);

  ScenarioSpec spec;
  try {
    spec = load_scenario(scenario_path);
  } catch (const std::exception& e) {
    emit(std::string("ERR cannot load scenario: ") + e.what());
    return 1;
  }

  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> per_config;
  for (const auto& o : net_overrides) {
    const auto eq = o.find('=');
    const auto colon = o.find(':', eq == std::string::npos ? 0 : eq);
    if (eq == std::string::npos || colon == std::string::npos) {
      std::cerr << "bad --net value '" << o << "'\n";
      return 2;
    }
    per_config[o.substr(0, eq)] = {std::stoull(o.substr(eq + 1, colon - eq - 1)),
                                   std::stoull(o.substr(colon + 1))};
  }

  emit("READY");
  std::string line;
  if (!std::getline(std::cin, line)) return 0;
  const auto cmd = parse_run_command(line);
  if (!cmd) {
    emit("ERR expected RUN <unit> <config-label>");
    return 1;
  }
  const auto* unit = spec.find_unit(cmd->unit);
  if (!unit || unit->is_composite()) {
    emit("ERR unknown basic unit '" + cmd->unit + "'");
    return 1;
  }
  if (cmd->unit == fail_unit) {
    emit("ERR simulated failure in " + cmd->unit);
    return 1;
  }
  if (fail_invocation > 0 && !state_file.empty() && bump_invocation(state_file) == fail_invocation) {
    emit("ERR simulated failure on invocation " + std::to_string(fail_invocation));
    return 1;
  }
  if (hang) {
    std::this_thread::sleep_for(std::chrono::hours(1));
    return 0;
  }
  if (violate == "end-without-start") {
    emit("STEP " + (unit->steps.empty() ? unit->name : unit->steps.front()) + " END " +
         std::to_string(monotonic_now().count()));
    return 0;
  }
  if (violate == "garbage") {
    emit("HELLO WORLD");
    return 0;
  }

  const std::vector<std::string> steps =
      unit->steps.empty() ? std::vector<std::string>{unit->name} : unit->steps;
  const auto t0 = monotonic_now();
  const auto total_ms =
      static_cast<std::int64_t>(std::llround(unit->target_duration_s * 1000.0 * duration_skew));
  const auto k = static_cast<std::int64_t>(steps.size());
  auto boundary = [&](std::int64_t i) { return t0 + Millis{(total_ms * i) / k}; };

  for (std::int64_t i = 0; i < k; ++i) {
    const auto start = boundary(i);
    const auto end = boundary(i + 1);
    sleep_until_ms(start);
    emit("STEP " + steps[i] + " START " + std::to_string(start.count()));
    sleep_until_ms(end);
    emit("STEP " + steps[i] + " END " + std::to_string(end.count()));
  }
  if (!no_net) {
    auto totals = std::make_pair(bytes_in, bytes_out);
    if (auto it = per_config.find(cmd->config_label); it != per_config.end()) totals = it->second;
    emit("NET " + std::to_string(totals.first) + " " + std::to_string(totals.second));
  }
  if (violate == "no-done") return 0;
  emit("DONE 0");
  return 0;
}
