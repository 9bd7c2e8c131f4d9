#include "ecotrace/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <exception>
#include <set>
#include <thread>

#include "ecotrace/analysis.hpp"
#include "ecotrace/error.hpp"
#include "ecotrace/process.hpp"
#include "ecotrace/protocol.hpp"

namespace ecotrace {

// ---------------------------------------------------------------- spec

const FunctionalUnit* ScenarioSpec::find_unit(std::string_view name) const {
  for (const auto& u : units)
    if (u.name == name) return &u;
  return nullptr;
}

const Configuration* ScenarioSpec::find_configuration(std::string_view label) const {
  for (const auto& c : configurations)
    if (c.label == label) return &c;
  return nullptr;
}

const ProviderSpec& ScenarioSpec::power_for(std::string_view config_label) const {
  auto it = power_overrides.find(config_label);
  return it != power_overrides.end() ? it->second : power;
}

std::vector<const FunctionalUnit*> ScenarioSpec::basic_units() const {
  std::vector<const FunctionalUnit*> out;
  for (const auto& u : units)
    if (!u.is_composite()) out.push_back(&u);
  return out;
}

std::vector<const FunctionalUnit*> ScenarioSpec::composite_units() const {
  std::vector<const FunctionalUnit*> out;
  for (const auto& u : units)
    if (u.is_composite()) out.push_back(&u);
  return out;
}

namespace {

[[noreturn]] void invalid(const std::string& message, const std::string& subject) {
  throw Error(ErrorKind::validation, message, subject);
}

/// Names travel over the wire protocol: printable, no leading/trailing or
/// doubled spaces.
void check_name(const std::string& name, const std::string& what) {
  if (name.empty()) invalid(what + " must be non-empty", what);
  if (name.front() == ' ' || name.back() == ' ' || name.find("  ") != std::string::npos) {
    invalid(what + " '" + name + "' has stray spaces", name);
  }
  for (unsigned char c : name) {
    if (c < 0x20 || c == 0x7f) invalid(what + " '" + name + "' has control characters", name);
  }
}

void check_label(const std::string& label) {
  if (label.empty()) invalid("configuration label must be non-empty", "label");
  for (char c : label) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    if (!ok) invalid("configuration label '" + label + "' must match [A-Za-z0-9_.-]+", label);
  }
}

const nlohmann::json& required(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) invalid(std::string("missing field '") + key + "'", key);
  return *it;
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  if (!j.is_array()) invalid(std::string("field '") + key + "' must be a list", key);
  std::vector<std::string> out;
  for (const auto& item : j) {
    if (!item.is_string()) invalid(std::string("field '") + key + "' must hold strings", key);
    out.push_back(item.get<std::string>());
  }
  return out;
}

bool bool_field(const nlohmann::json& j, const char* key, const std::string& owner) {
  auto it = j.find(key);
  if (it == j.end()) return false;
  if (!it->is_boolean()) invalid(owner + ": field '" + key + "' must be a boolean", key);
  return it->get<bool>();
}

}  // namespace

ScenarioSpec parse_scenario(std::string_view content, const std::filesystem::path& base_dir) {
  nlohmann::json raw;
  try {
    raw = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    invalid(std::string("scenario is not valid JSON: ") + e.what(), "scenario");
  }
  if (!raw.is_object()) invalid("scenario must be a JSON object", "scenario");

  ScenarioSpec spec;
  spec.base_dir = base_dir;
  if (raw.contains("services")) spec.services = string_list(raw["services"], "services");

  if (raw.contains("n_runs")) {
    const auto& n = raw["n_runs"];
    if (!n.is_number_integer()) invalid("field 'n_runs' must be an integer", "n_runs");
    spec.n_runs = n.get<int>();
    if (spec.n_runs < 1) invalid("field 'n_runs' must be >= 1", "n_runs");
  }
  if (raw.contains("sampling_interval_ms")) {
    const auto& v = raw["sampling_interval_ms"];
    if (!v.is_number_integer()) {
      invalid("field 'sampling_interval_ms' must be an integer", "sampling_interval_ms");
    }
    spec.sampling_interval = Millis{v.get<std::int64_t>()};
    if (spec.sampling_interval < kMinSamplingInterval) {
      invalid("field 'sampling_interval_ms' must be >= 10", "sampling_interval_ms");
    }
  }
  if (raw.contains("cooldown_ms")) {
    const auto& v = raw["cooldown_ms"];
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      invalid("field 'cooldown_ms' must be a non-negative integer", "cooldown_ms");
    }
    spec.cooldown = Millis{v.get<std::int64_t>()};
  }
  if (raw.contains("seed")) {
    if (!raw["seed"].is_number_unsigned()) invalid("field 'seed' must be >= 0", "seed");
    spec.seed = raw["seed"].get<std::uint64_t>();
  }
  if (raw.contains("idle_unit")) {
    if (!raw["idle_unit"].is_string()) invalid("field 'idle_unit' must be a string", "idle_unit");
    spec.idle_unit = raw["idle_unit"].get<std::string>();
  }

  const auto& driver = required(raw, "driver_command");
  if (!driver.is_string() || driver.get<std::string>().empty()) {
    invalid("field 'driver_command' must be a non-empty string", "driver_command");
  }
  spec.driver_command = driver.get<std::string>();
  split_command(spec.driver_command);

  // configurations
  const auto& configs = required(raw, "configurations");
  if (!configs.is_array() || configs.empty()) {
    invalid("field 'configurations' must be a non-empty list", "configurations");
  }
  std::set<std::string> labels;
  for (const auto& c : configs) {
    if (!c.is_object()) invalid("each configuration must be an object", "configurations");
    Configuration cfg;
    const auto& label = required(c, "label");
    if (!label.is_string()) invalid("configuration 'label' must be a string", "label");
    cfg.label = label.get<std::string>();
    check_label(cfg.label);
    if (!labels.insert(cfg.label).second) {
      invalid("duplicate configuration label '" + cfg.label + "'", cfg.label);
    }
    cfg.ad_blocker = bool_field(c, "ad_blocker", cfg.label);
    cfg.cookie_blocking = bool_field(c, "cookie_blocking", cfg.label);
    if (c.contains("provider")) {
      if (!c["provider"].is_string()) invalid("configuration 'provider' must be a string", "provider");
      cfg.provider = c["provider"].get<std::string>();
    }
    if (c.contains("power")) spec.power_overrides.emplace(cfg.label,
                                                          parse_provider_spec(c["power"], "power"));
    spec.configurations.push_back(std::move(cfg));
  }

  // units
  const auto& units = required(raw, "units");
  if (!units.is_array() || units.empty()) invalid("field 'units' must be a non-empty list", "units");
  std::set<std::string> names;
  for (const auto& u : units) {
    if (!u.is_object()) invalid("each unit must be an object", "units");
    FunctionalUnit unit;
    const auto& name = required(u, "name");
    if (!name.is_string()) invalid("unit 'name' must be a string", "name");
    unit.name = name.get<std::string>();
    check_name(unit.name, "unit name");
    if (!names.insert(unit.name).second) invalid("duplicate unit name '" + unit.name + "'", unit.name);
    if (u.contains("steps")) unit.steps = string_list(u["steps"], "steps");
    for (const auto& s : unit.steps) check_name(s, "step name");
    if (u.contains("composite_of")) unit.composite_of = string_list(u["composite_of"], "composite_of");
    if (u.contains("target_duration_s")) {
      if (!u["target_duration_s"].is_number()) {
        invalid("unit '" + unit.name + "': target_duration_s must be a number", "target_duration_s");
      }
      unit.target_duration_s = u["target_duration_s"].get<double>();
      if (!(unit.target_duration_s > 0.0) || !std::isfinite(unit.target_duration_s)) {
        invalid("unit '" + unit.name + "': target_duration_s must be > 0", "target_duration_s");
      }
    } else if (!unit.is_composite()) {
      invalid("unit '" + unit.name + "': missing field 'target_duration_s'", "target_duration_s");
    }
    spec.units.push_back(std::move(unit));
  }
  for (auto& unit : spec.units) {
    if (!unit.is_composite()) continue;
    double total = 0.0;
    for (const auto& member : unit.composite_of) {
      const auto* m = spec.find_unit(member);
      if (!m) {
        invalid("composite '" + unit.name + "' references unknown unit '" + member + "'", member);
      }
      if (m->is_composite()) {
        invalid("composite '" + unit.name + "' references composite '" + member +
                    "'; only basic units may be composed",
                member);
      }
      total += m->target_duration_s;
    }
    if (unit.target_duration_s <= 0.0) unit.target_duration_s = total;
  }
  if (spec.basic_units().empty()) invalid("scenario needs at least one basic unit", "units");

  if (raw.contains("power")) spec.power = parse_provider_spec(raw["power"], "power");
  if (raw.contains("network")) spec.network = parse_provider_spec(raw["network"], "network");
  return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  auto dir = std::filesystem::absolute(path).parent_path();
  return parse_scenario(text, dir);
}

nlohmann::json to_json(const ScenarioSpec& spec) {
  nlohmann::json configs = nlohmann::json::array();
  for (const auto& c : spec.configurations) {
    nlohmann::json j{{"label", c.label},
                     {"ad_blocker", c.ad_blocker},
                     {"cookie_blocking", c.cookie_blocking},
                     {"provider", c.provider}};
    auto it = spec.power_overrides.find(c.label);
    if (it != spec.power_overrides.end()) j["power"] = to_json(it->second, "power");
    configs.push_back(std::move(j));
  }
  nlohmann::json units = nlohmann::json::array();
  for (const auto& u : spec.units) {
    units.push_back({{"name", u.name},
                     {"steps", u.steps},
                     {"target_duration_s", u.target_duration_s},
                     {"composite_of", u.composite_of}});
  }
  nlohmann::json j{{"services", spec.services},
                   {"configurations", configs},
                   {"units", units},
                   {"n_runs", spec.n_runs},
                   {"sampling_interval_ms", spec.sampling_interval.count()},
                   {"cooldown_ms", spec.cooldown.count()},
                   {"seed", spec.seed},
                   {"idle_unit", spec.idle_unit},
                   {"driver_command", spec.driver_command},
                   {"power", to_json(spec.power, "power")}};
  if (spec.network) j["network"] = to_json(*spec.network, "network");
  return j;
}

std::uint64_t run_seed(std::uint64_t scenario_seed, std::string_view unit, int run_index) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ scenario_seed;
  for (unsigned char c : unit) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= static_cast<std::uint64_t>(run_index) * 0x9e3779b97f4a7c15ULL;
  h *= 0x100000001b3ULL;
  return h;
}

// ---------------------------------------------------------------- runs

namespace {

/// Hands driver counters to the sampler while recording the fallback
/// source on the same schedule, so precedence can be decided afterwards.
class TeeNetworkProvider final : public NetworkProvider {
 public:
  TeeNetworkProvider(DriverNetworkProvider& driver, NetworkProvider* fallback)
      : driver_(driver), fallback_(fallback) {}

  const std::vector<NetworkCounters>& fallback_samples() const { return fallback_samples_; }
  std::exception_ptr fallback_error() const { return fallback_error_; }

 protected:
  NetworkCounters do_poll(Millis t) override {
    if (fallback_ && !fallback_error_) {
      try {
        fallback_samples_.push_back(fallback_->poll(t));
      } catch (const Error&) {
        fallback_error_ = std::current_exception();
      }
    }
    return driver_.poll(t);
  }

 private:
  DriverNetworkProvider& driver_;
  NetworkProvider* fallback_;
  std::vector<NetworkCounters> fallback_samples_;
  std::exception_ptr fallback_error_;
};

struct Fallback {
  std::unique_ptr<NetworkProvider> provider;
  NetworkSource source = NetworkSource::synthetic;
};

Fallback make_fallback(const ScenarioSpec& spec) {
  if (spec.network) {
    const auto source = spec.network->kind == ProviderKind::replay   ? NetworkSource::replay
                        : spec.network->kind == ProviderKind::sensor ? NetworkSource::sensor
                                                                     : NetworkSource::synthetic;
    return {make_network_provider(*spec.network, spec.base_dir), source};
  }
  try {
    return {std::make_unique<PlatformNetworkProvider>(), NetworkSource::sensor};
  } catch (const Error&) {
    return {std::make_unique<SyntheticNetworkProvider>(0.0, 0.0), NetworkSource::synthetic};
  }
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunRecord run_unit(const FunctionalUnit& unit, const Configuration& config,
                   const ScenarioSpec& spec, int run_index, const RunOptions& options) {
  if (unit.is_composite()) {
    throw Error(ErrorKind::validation,
                "composite unit '" + unit.name + "' is estimated, never executed", unit.name);
  }
  auto power = make_power_provider(spec.power_for(config.label),
                                   run_seed(spec.seed, unit.name, run_index), spec.base_dir);
  auto fallback = make_fallback(spec);
  DriverNetworkProvider driver_net;
  TeeNetworkProvider tee(driver_net, fallback.provider.get());

  RunRecord record;
  record.unit = unit.name;
  record.configuration = config.label;
  record.run_index = run_index;
  record.wall_clock_utc = utc_now();

  ChildProcess child(split_command(spec.driver_command), spec.base_dir);
  ProtocolStateMachine machine;
  std::string line;

  const auto ready_deadline = std::chrono::steady_clock::now() + options.ready_timeout;
  while (machine.state() == ProtocolStateMachine::State::awaiting_ready) {
    const auto status = child.read_line(line, ready_deadline);
    if (status == ChildProcess::ReadStatus::timeout) {
      throw Error(ErrorKind::timeout, "driver did not send READY within " +
                                          std::to_string(options.ready_timeout.count()) + " ms");
    }
    if (status == ChildProcess::ReadStatus::eof) {
      throw Error(ErrorKind::protocol, "protocol violation: driver exited before READY");
    }
    machine.accept(parse_driver_line(line), line);
    if (machine.state() == ProtocolStateMachine::State::failed) {
      throw Error(ErrorKind::run, "driver error: " + machine.error_message(), unit.name);
    }
  }

  child.write_line(format_run_command(unit.name, config.label));
  const auto timeout = std::chrono::milliseconds(
      static_cast<std::int64_t>(std::ceil(kDriverTimeoutFactor * unit.target_duration_s * 1000.0)));
  const auto run_deadline = std::chrono::steady_clock::now() + timeout;

  SteadyClock clock;
  StopSignal stop;
  std::optional<ResourceTrace> trace;
  std::exception_ptr sampler_error;
  std::jthread sampler;
  Millis origin{0};
  Millis clock_offset{0};
  std::optional<NetworkCounters> last_net;
  std::size_t net_index = 0;

  auto abort_sampler = [&] {
    stop.request_stop();
    if (sampler.joinable()) sampler.join();
  };

  try {
    for (;;) {
      const auto status = child.read_line(line, run_deadline);
      if (status == ChildProcess::ReadStatus::timeout) {
        throw Error(ErrorKind::timeout, "driver did not finish unit '" + unit.name + "' within " +
                                            std::to_string(timeout.count()) + " ms",
                    unit.name);
      }
      if (status == ChildProcess::ReadStatus::eof) {
        throw Error(ErrorKind::protocol, "protocol violation: driver exited before DONE");
      }
      const auto ev = parse_driver_line(line);
      machine.accept(ev, line);
      switch (ev.kind) {
        case DriverEventKind::step_start:
          if (!sampler.joinable()) {
            // Drivers are expected to stamp events on CLOCK_MONOTONIC; fall
            // back to receipt time when the stamp is clearly from elsewhere.
            const auto now = clock.now();
            const auto lag = now - ev.t;
            clock_offset = (lag >= Millis{0} && lag <= Millis{2000}) ? Millis{0} : lag;
            origin = ev.t + clock_offset;
            sampler = std::jthread([&, origin] {
              try {
                trace = sample_run(*power, tee, spec.sampling_interval, stop, clock, origin);
              } catch (...) {
                sampler_error = std::current_exception();
              }
            });
          }
          break;
        case DriverEventKind::net:
          if (last_net && (ev.bytes_in < last_net->bytes_in || ev.bytes_out < last_net->bytes_out)) {
            throw Error(ErrorKind::monotonicity,
                        "driver NET counters decreased at sample index " +
                            std::to_string(net_index),
                        std::to_string(net_index));
          }
          last_net = NetworkCounters{Millis{0}, ev.bytes_in, ev.bytes_out};
          ++net_index;
          driver_net.report(ev.bytes_in, ev.bytes_out);
          break;
        case DriverEventKind::err:
          throw Error(ErrorKind::run, "driver error: " + ev.message, unit.name);
        default:
          break;
      }
      if (machine.state() == ProtocolStateMachine::State::done) break;
    }
  } catch (...) {
    abort_sampler();
    child.kill();
    throw;
  }

  const Millis window = *machine.last_end() - *machine.first_start();
  stop.request_stop(window);
  if (sampler.joinable()) sampler.join();
  child.finish(std::chrono::milliseconds(1000));
  if (sampler_error) std::rethrow_exception(sampler_error);
  if (!trace) throw Error(ErrorKind::trace_too_short, "no samples collected", unit.name);

  record.duration_s = static_cast<double>(window.count()) / 1000.0;
  const double deviation = std::abs(record.duration_s - unit.target_duration_s);
  if (deviation > kDurationTolerance * unit.target_duration_s + 1e-9) {
    throw Error(ErrorKind::run,
                "unit '" + unit.name + "' ran " + std::to_string(record.duration_s) +
                    " s, outside +/-10% of target " + std::to_string(unit.target_duration_s) + " s",
                unit.name);
  }

  trace->start_t = Millis{0};
  trace->end_t = window;
  if (driver_net.any_reported()) {
    // NET lines carry no timestamp; the final totals are attributed to the
    // end of the window.
    const auto final_counts = driver_net.latest();
    auto& net = trace->network;
    if (!net.empty() && net.back().t == window) {
      net.back().bytes_in = std::max(net.back().bytes_in, final_counts.bytes_in);
      net.back().bytes_out = std::max(net.back().bytes_out, final_counts.bytes_out);
    } else {
      net.push_back({window, final_counts.bytes_in, final_counts.bytes_out});
    }
    record.network_source = NetworkSource::driver;
    record.bytes_total = final_counts.bytes_in + final_counts.bytes_out;
  } else {
    if (tee.fallback_error()) std::rethrow_exception(tee.fallback_error());
    trace->network = tee.fallback_samples();
    record.network_source = fallback.source;
    if (!trace->network.empty()) {
      const auto& first = trace->network.front();
      const auto& last = trace->network.back();
      record.bytes_total =
          (last.bytes_in - first.bytes_in) + (last.bytes_out - first.bytes_out);
    }
  }
  validate_trace(*trace);

  record.energy_j = integrate_energy(*trace);
  record.trace = std::move(*trace);
  record.window_start = origin;
  record.window_end = origin + window;
  return record;
}

CampaignRecord run_campaign(const ScenarioSpec& spec, const Configuration& config,
                            const CampaignOptions& options) {
  CampaignRecord campaign;
  campaign.configuration = config;
  campaign.n_runs_per_unit = spec.n_runs;
  const auto units = spec.basic_units();
  for (const auto* u : units) campaign.runs[u->name];

  const Millis cooldown = options.cooldown.value_or(spec.cooldown);
  bool first = true;
  for (int run = 1; run <= spec.n_runs; ++run) {
    for (const auto* unit : units) {
      if (!first && cooldown > Millis{0}) std::this_thread::sleep_for(cooldown);
      first = false;
      if (options.progress) {
        options.progress("[" + config.label + "] " + unit->name + " run " + std::to_string(run) +
                         "/" + std::to_string(spec.n_runs));
      }
      try {
        campaign.runs[unit->name].push_back(run_unit(*unit, config, spec, run, options.run));
      } catch (const Error& e) {
        if (!options.keep_going) {
          throw Error(ErrorKind::campaign,
                      "campaign '" + config.label + "' aborted at unit '" + unit->name +
                          "' run " + std::to_string(run) + ": " + std::string(to_string(e.kind())) +
                          " error: " + e.what(),
                      unit->name);
        }
        campaign.failures.push_back(
            {unit->name, run, std::string(to_string(e.kind())), e.what()});
        if (options.progress) options.progress("  failed: " + std::string(e.what()));
      }
    }
  }
  return campaign;
}

}  // namespace ecotrace
