// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "cli_runner.hpp"
#include "ecotrace/analysis.hpp"
#include "ecotrace/error.hpp"
#include "ecotrace/protocol.hpp"
#include "ecotrace/sampling.hpp"
#include "emission_oracle.hpp"
#include "protocol_fuzz.hpp"
#include "records.hpp"

using namespace ecotrace;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Seconds = std::chrono::duration<double>;

bool report(const char* id, const char* what, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double elapsed = Seconds(std::chrono::steady_clock::now() - t0).count();
  if (elapsed >= budget_s) {
    o.pass = false;
    o.detail += " (over time budget " + std::to_string(budget_s) + " s)";
  }
  std::printf("%s %s: %s [%.2f s] %s\n", id, o.pass ? "PASS" : "FAIL", what, elapsed,
              o.detail.c_str());
  std::fflush(stdout);
  return o.pass;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

double sampled_machine_j(const WaveformSpec& w, Millis interval, Millis duration) {
  SyntheticPowerProvider p({{"machine", w}});
  SyntheticNetworkProvider net(0.0, 0.0);
  VirtualClock clock;
  StopSignal stop(duration);
  return integrate_energy(sample_run(p, net, interval, stop, clock, Millis{0})).at("machine").joules;
}

Outcome ac1() {
  const double flat = sampled_machine_j({WaveShape::constant, 10.0, 10.0, 1.0, 0.0}, Millis{100},
                                        Millis{60000});
  const double ramp = sampled_machine_j({WaveShape::ramp, 0.0, 10.0, 10.0, 0.0}, Millis{100},
                                        Millis{10000});
  std::ostringstream s;
  s << "constant=" << flat << " J, ramp=" << ramp << " J";
  return {rel_err(flat, 600.0) <= 1e-6 && rel_err(ramp, 50.0) <= 1e-9, s.str()};
}

Outcome ac2() {
  std::mt19937_64 rng(97);
  const int cases = 5000;
  for (int i = 0; i < cases; ++i) {
    const auto failure = emission_oracle::check_case(rng);
    if (!failure.empty()) return {false, "case " + std::to_string(i) + ": " + failure};
  }
  return {true, std::to_string(cases) + " cases"};
}

Outcome ac3() {
  const auto s = records::stats("Login", {1, 2, 3, 4, 5}).energy_j.at("machine");
  if (std::abs(s.mean - 3.0) > 1e-9 || !s.sample_std || std::abs(*s.sample_std - std::sqrt(2.5)) > 1e-9) {
    return {false, "aggregate mismatch"};
  }
  std::mt19937_64 rng(41);
  const int campaigns = 1000;
  for (int i = 0; i < campaigns; ++i) {
    const auto a = records::random_campaign(rng, "A");
    const auto b = records::random_campaign(rng, "B");
    const auto ab = compare(a, b);
    const auto ba = compare(b, a);
    for (const auto& [unit, d] : ab.per_unit) {
      const auto& e = ba.per_unit.at(unit);
      for (const auto& [ch, v] : d.energy_j) {
        const auto t1 = d.welch_t.at(ch);
        const auto t2 = e.welch_t.at(ch);
        if (v != -e.energy_j.at(ch) || t1.has_value() != t2.has_value() || (t1 && *t1 != -*t2)) {
          return {false, "antisymmetry broken for " + unit + "/" + ch};
        }
      }
      if (d.bytes != -e.bytes) return {false, "bytes antisymmetry broken for " + unit};
    }
  }
  std::ostringstream out;
  out << "mean=" << s.mean << " std=" << *s.sample_std << ", " << campaigns
      << " antisymmetric campaign pairs";
  return {true, out.str()};
}

Outcome ac4() {
  std::mt19937_64 rng(1009);
  int nonconforming = 0;
  int conforming = 0;
  int total = 0;
  while (nonconforming < 10000) {
    const auto s = fuzz::mutate(fuzz::valid_stream(rng), rng);
    ++total;
    const auto expected = fuzz::oracle(s);
    bool accepted = true;
    try {
      validate_transcript(s);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::protocol) return {false, "non-protocol error kind"};
      accepted = false;
    }
    if (accepted != expected.accepted) {
      std::string dump;
      for (const auto& l : s) dump += "[" + l + "]";
      return {false, std::string(accepted ? "accepted" : "rejected") + " against oracle: " + dump};
    }
    expected.accepted ? ++conforming : ++nonconforming;
  }
  return {true, std::to_string(total) + " mutated streams, " + std::to_string(nonconforming) +
                    " rejected, " + std::to_string(conforming) + " still conforming"};
}

json e2e_scenario() {
  auto power = fixture::constant_power(12.0);
  power["channels"]["machine"]["noise_w"] = 1.5;
  power["channels"]["cpu"] = {{"shape", "step"}, {"amplitude_start_w", 2.0},
                              {"amplitude_end_w", 6.0}, {"period_s", 0.05}, {"noise_w", 0.5}};
  return fixture::scenario(fixture::mail_units(1.0),
                           fixture::driver("--bytes-in 2500000 --bytes-out 300000"), 5, power);
}

/// Runs both configurations and the comparison inside `dir`.
std::string run_e2e(const fixture::TempDir& dir) {
  cli::stage(dir, e2e_scenario());
  for (const char* cfg : {"adblock-on", "adblock-off"}) {
    const auto r = cli::run(cli::run_args(cfg, std::string(cfg) + ".json"), dir);
    if (r.exit_code != 0) return std::string("run ") + cfg + " exited " + std::to_string(r.exit_code) + ": " + r.err;
  }
  const auto r = cli::run("compare adblock-off.json adblock-on.json --out comparison.json", dir);
  if (r.exit_code != 0) return "compare exited " + std::to_string(r.exit_code) + ": " + r.err;
  return {};
}

Outcome ac5(const fixture::TempDir& dir) {
  if (auto err = run_e2e(dir); !err.empty()) return {false, err};
  const auto on = json::parse(fixture::read(dir / "adblock-on.json"));
  int runs = 0;
  for (const auto& [name, u] : on["units"].items()) runs += static_cast<int>(u["runs"].size());
  if (runs != 35) return {false, std::to_string(runs) + " runs in report, expected 35"};

  const auto cmp = json::parse(fixture::read(dir / "comparison.json"));
  double worst = 0.0;
  int deltas = 0;
  for (const auto& [name, u] : cmp["units"].items()) {
    for (const auto& [ch, v] : u["delta_energy_j"].items()) {
      worst = std::max(worst, std::abs(v.get<double>()));
      ++deltas;
    }
    worst = std::max(worst, std::abs(u["delta_bytes"].get<double>()));
    for (const auto& [c, v] : u["delta_emissions_kgco2e"].items()) {
      worst = std::max(worst, std::abs(v.get<double>()));
      ++deltas;
    }
  }
  std::ostringstream s;
  s << cmp["units"].size() << " units, " << deltas << " deltas, max |delta|=" << worst;
  return {cmp["units"].size() == 8 && worst <= 1e-9, s.str()};
}

Outcome ac6(const fixture::TempDir& first) {
  fixture::TempDir second;
  if (auto err = run_e2e(second); !err.empty()) return {false, err};
  for (const char* f : {"adblock-on.json", "adblock-off.json", "comparison.json"}) {
    if (fixture::read(first / f) != fixture::read(second / f)) {
      return {false, std::string(f) + " differs between executions"};
    }
  }
  return {true, "3 report files byte-identical"};
}

Outcome ac7() {
  const double want = 1e-6 * 3.33e11 * 365.0;
  const auto t = extrapolate(1e-6, 0.0, 3.33e11);
  std::ostringstream s;
  s.precision(10);
  s << "annual=" << t.energy_kwh << " kWh";
  return {rel_err(t.energy_kwh, want) <= 1e-6 && rel_err(t.energy_kwh, 1.215e8) <= 1e-3, s.str()};
}

}  // namespace

int main() {
  bool ok = true;
  ok &= report("AC1", "integration oracle", 1.0, ac1);
  ok &= report("AC2", "emission arithmetic oracle", 5.0, ac2);
  ok &= report("AC3", "statistics oracle", 60.0, ac3);
  ok &= report("AC4", "protocol fuzzing", 30.0, ac4);
  fixture::TempDir e2e;
  ok &= report("AC5", "hermetic end-to-end, 7 units x 5 runs x 2 configurations", 120.0,
               [&] { return ac5(e2e); });
  ok &= report("AC6", "deterministic reports", 120.0, [&] { return ac6(e2e); });
  ok &= report("AC7", "extrapolation anchor", 1.0, ac7);
  std::printf("%s\n", ok ? "ALL PASS" : "FAILURES");
  return ok ? 0 : 1;
}
