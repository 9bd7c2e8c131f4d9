#include "ecotrace/report.hpp"

#include <charconv>
#include <cmath>

#include "ecotrace/error.hpp"

namespace ecotrace {

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"sample_std", opt(s.sample_std)}, {"n", s.n}};
}

[[noreturn]] void schema_error(const std::string& what) {
  throw Error(ErrorKind::validation, "report does not follow the schema: " + what, what);
}

const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  if (!j.is_object()) schema_error(std::string("expected object around '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) schema_error(std::string("missing '") + key + "'");
  return *it;
}

double number(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number()) schema_error(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

std::optional<double> opt_number(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) schema_error(std::string("'") + key + "' must be a number or null");
  return v.get<double>();
}

Summary summary_from(const nlohmann::json& j) {
  Summary s;
  s.mean = number(j, "mean");
  s.sample_std = opt_number(j, "sample_std");
  const auto& n = field(j, "n");
  if (!n.is_number_unsigned()) schema_error("'n' must be a non-negative integer");
  s.n = n.get<std::size_t>();
  return s;
}

std::vector<std::string> strings_from(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_array()) schema_error(std::string("'") + key + "' must be a list");
  std::vector<std::string> out;
  for (const auto& s : v) {
    if (!s.is_string()) schema_error(std::string("'") + key + "' must hold strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

nlohmann::json uncertainty_json(const EmissionUncertainty& u) {
  return {{"user_use", opt(u.user_use)},
          {"network_use", opt(u.network_use)},
          {"server_use", opt(u.server_use)},
          {"network_embodied_eol", opt(u.network_embodied_eol)},
          {"server_embodied_eol", opt(u.server_embodied_eol)},
          {"user_embodied", opt(u.user_embodied)},
          {"total", opt(u.total)}};
}

EmissionUncertainty uncertainty_from(const nlohmann::json& j) {
  EmissionUncertainty u;
  u.user_use = opt_number(j, "user_use");
  u.network_use = opt_number(j, "network_use");
  u.server_use = opt_number(j, "server_use");
  u.network_embodied_eol = opt_number(j, "network_embodied_eol");
  u.server_embodied_eol = opt_number(j, "server_embodied_eol");
  u.user_embodied = opt_number(j, "user_embodied");
  u.total = opt_number(j, "total");
  return u;
}

std::string csv_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

ReportDocument parse_report(const nlohmann::json& j);

}  // namespace

CampaignSummary ReportDocument::summary() const {
  CampaignSummary s;
  s.label = configuration.label;
  for (const auto& [name, unit] : units) {
    s.units.emplace(name, unit.stats);
    if (unit.emissions) s.emissions_kgco2e.emplace(name, unit.emissions->components());
  }
  return s;
}

ReportDocument build_report(const ScenarioSpec& spec, const CampaignRecord& campaign,
                            const EmissionFactors& factors, const MachineProfile& machine) {
  ReportDocument doc;
  doc.scenario = to_json(spec);
  doc.configuration = campaign.configuration;
  doc.n_runs_per_unit = campaign.n_runs_per_unit;
  doc.complete = campaign.complete();
  doc.failures = campaign.failures;
  doc.factors = factors;
  doc.machine = machine;
  if (!doc.complete) doc.flags.push_back("incomplete_campaign");

  std::map<std::string, UnitStats, std::less<>> basic;
  for (const auto& [name, runs] : campaign.runs) {
    if (runs.empty()) {
      doc.flags.push_back("no_successful_runs:" + name);
      continue;
    }
    UnitReport unit;
    unit.stats = aggregate_runs(runs);
    for (const auto& r : runs) {
      RunSummary rs{r.run_index, {}, r.bytes_total, r.duration_s,
                    std::string(to_string(r.network_source))};
      for (const auto& [channel, e] : r.energy_j) rs.energy_j.emplace(channel, e.joules);
      unit.runs.push_back(std::move(rs));
    }
    basic.emplace(name, unit.stats);
    doc.units.emplace(name, std::move(unit));
  }

  for (const auto* composite : spec.composite_units()) {
    UnitReport unit;
    unit.estimated = true;
    unit.composite_of = composite->composite_of;
    try {
      unit.stats = compose_units(basic, *composite);
    } catch (const Error& e) {
      doc.flags.push_back("composite_unavailable:" + composite->name + ": " + e.what());
      continue;
    }
    doc.units.emplace(composite->name, std::move(unit));
  }

  std::optional<UnitStats> idle;
  if (auto it = basic.find(spec.idle_unit); it != basic.end()) idle = it->second;
  if (idle) {
    try {
      doc.idle_power_w = idle_power_w(*idle);
    } catch (const Error& e) {
      doc.flags.push_back(std::string("idle_adjustment_unavailable: ") + e.what());
    }
  } else {
    doc.flags.push_back("idle_adjustment_unavailable: no '" + spec.idle_unit + "' unit measured");
  }

  for (auto& [name, unit] : doc.units) {
    for (auto channel : kReservedChannels) {
      if (!unit.stats.energy_j.contains(channel)) unit.absent_channels.emplace_back(channel);
    }
    for (const auto& c : unit.absent_channels) doc.flags.push_back("absent_channel:" + name + ":" + c);
    for (const auto& c : unit.stats.partial_channels) {
      doc.flags.push_back("partial_channel:" + name + ":" + c);
    }
    const auto machine_it = unit.stats.energy_j.find(kChannelMachine);
    if (doc.idle_power_w && idle && machine_it != unit.stats.energy_j.end()) {
      unit.machine_idle_adjusted =
          idle_adjust(machine_it->second.mean, *idle, unit.stats.duration_s.mean);
      if (unit.machine_idle_adjusted->floored) doc.flags.push_back("floored_adjustment:" + name);
    }
    try {
      unit.emissions = total_footprint(unit.stats, factors, machine);
      unit.emissions_std = footprint_uncertainty(unit.stats, factors, machine);
    } catch (const Error&) {
      doc.flags.push_back("emissions_unavailable:" + name);
    }
  }
  return doc;
}

nlohmann::json to_json(const ReportDocument& doc) {
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : doc.failures) {
    failures.push_back(
        {{"unit", f.unit}, {"run_index", f.run_index}, {"kind", f.kind}, {"message", f.message}});
  }
  nlohmann::json units = nlohmann::json::object();
  for (const auto& [name, u] : doc.units) {
    nlohmann::json energy = nlohmann::json::object();
    for (const auto& [channel, s] : u.stats.energy_j) energy[channel] = summary_json(s);
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : u.runs) {
      runs.push_back({{"run_index", r.run_index},
                      {"energy_j", r.energy_j},
                      {"bytes", r.bytes},
                      {"duration_s", r.duration_s},
                      {"network_source", r.network_source}});
    }
    nlohmann::json adjusted(nullptr);
    if (u.machine_idle_adjusted) {
      adjusted = {{"raw", u.machine_idle_adjusted->raw_j},
                  {"adjusted", u.machine_idle_adjusted->adjusted_j},
                  {"floored", u.machine_idle_adjusted->floored}};
    }
    nlohmann::json emissions(nullptr);
    if (u.emissions) emissions = u.emissions->components();
    units[name] = {
        {"estimated", u.estimated},
        {"composite_of", u.composite_of},
        {"energy_j", energy},
        {"bytes", summary_json(u.stats.bytes)},
        {"duration_s", summary_json(u.stats.duration_s)},
        {"partial_channels", u.stats.partial_channels},
        {"absent_channels", u.absent_channels},
        {"machine_energy_idle_adjusted_j", adjusted},
        {"emissions_kgco2e", emissions},
        {"emissions_std_kgco2e", uncertainty_json(u.emissions_std)},
        {"runs", runs},
    };
  }
  nlohmann::json j{
      {"schema_version", doc.schema_version},
      {"campaign",
       {{"configuration",
         {{"label", doc.configuration.label},
          {"ad_blocker", doc.configuration.ad_blocker},
          {"cookie_blocking", doc.configuration.cookie_blocking},
          {"provider", doc.configuration.provider}}},
        {"n_runs_per_unit", doc.n_runs_per_unit},
        {"complete", doc.complete},
        {"failures", failures}}},
      {"scenario", doc.scenario},
      {"factors", to_json(doc.factors)},
      {"machine", to_json(doc.machine)},
      {"idle_power_w", opt(doc.idle_power_w)},
      {"units", units},
      {"flags", doc.flags},
      {"methodology",
       {{"integration", "trapezoidal rule between consecutive samples of each channel"},
        {"dispersion", "sample standard deviation (n - 1); null when n = 1"},
        {"composites",
         "estimated from basic units, never executed; means add and variances add "
         "(independence across units assumed)"},
        {"idle_adjustment",
         "adjusted = raw - idle_power_w * duration_s, floored at 0 and flagged"},
        {"user_use", "mean machine energy converted to kWh times grid intensity"},
        {"network_server",
         "allocated, not metered: mean bytes (in + out) / 1e9 times per-GB factors"},
        {"user_embodied",
         "embodied_total_kgco2e * usage_share * duration_s / lifetime_s (linear time share)"},
        {"uncertainty",
         "standard deviations propagated linearly per component; traffic components add "
         "linearly, energy, traffic, and duration combine in quadrature for the total"}}},
  };
  if (doc.generated_at) j["generated_at"] = *doc.generated_at;
  return j;
}

ReportDocument report_from_json(const nlohmann::json& j) {
  try {
    return parse_report(j);
  } catch (const nlohmann::json::exception& e) {
    schema_error(e.what());
  }
}

namespace {

ReportDocument parse_report(const nlohmann::json& j) {
  ReportDocument doc;
  const auto& version = field(j, "schema_version");
  if (!version.is_string()) schema_error("'schema_version' must be a string");
  doc.schema_version = version.get<std::string>();
  if (j.contains("generated_at") && j["generated_at"].is_string()) {
    doc.generated_at = j["generated_at"].get<std::string>();
  }
  const auto& campaign = field(j, "campaign");
  const auto& config = field(campaign, "configuration");
  doc.configuration.label = field(config, "label").get<std::string>();
  doc.configuration.ad_blocker = field(config, "ad_blocker").get<bool>();
  doc.configuration.cookie_blocking = field(config, "cookie_blocking").get<bool>();
  doc.configuration.provider = field(config, "provider").get<std::string>();
  doc.n_runs_per_unit = field(campaign, "n_runs_per_unit").get<int>();
  doc.complete = field(campaign, "complete").get<bool>();
  for (const auto& f : field(campaign, "failures")) {
    doc.failures.push_back({field(f, "unit").get<std::string>(), field(f, "run_index").get<int>(),
                            field(f, "kind").get<std::string>(),
                            field(f, "message").get<std::string>()});
  }
  doc.scenario = field(j, "scenario");
  doc.factors = validate_factors(field(j, "factors"));
  doc.machine = validate_machine(field(j, "machine"));
  doc.idle_power_w = opt_number(j, "idle_power_w");
  doc.flags = strings_from(j, "flags");

  const auto& units = field(j, "units");
  if (!units.is_object()) schema_error("'units' must be an object");
  for (const auto& [name, u] : units.items()) {
    UnitReport unit;
    unit.stats.unit = name;
    unit.estimated = field(u, "estimated").get<bool>();
    unit.composite_of = strings_from(u, "composite_of");
    for (const auto& [channel, s] : field(u, "energy_j").items()) {
      unit.stats.energy_j.emplace(channel, summary_from(s));
    }
    unit.stats.bytes = summary_from(field(u, "bytes"));
    unit.stats.duration_s = summary_from(field(u, "duration_s"));
    for (auto& c : strings_from(u, "partial_channels")) unit.stats.partial_channels.insert(c);
    unit.absent_channels = strings_from(u, "absent_channels");
    const auto& adj = field(u, "machine_energy_idle_adjusted_j");
    if (!adj.is_null()) {
      unit.machine_idle_adjusted =
          IdleAdjustment{number(adj, "raw"), number(adj, "adjusted"), field(adj, "floored").get<bool>()};
    }
    const auto& em = field(u, "emissions_kgco2e");
    if (!em.is_null()) {
      ComponentMap components;
      for (const auto& [k, v] : em.items()) {
        if (!v.is_number()) schema_error("emission components must be numbers");
        components.emplace(k, v.get<double>());
      }
      unit.emissions = EmissionBreakdown::from_components(components);
    }
    unit.emissions_std = uncertainty_from(field(u, "emissions_std_kgco2e"));
    for (const auto& r : field(u, "runs")) {
      RunSummary rs;
      rs.run_index = field(r, "run_index").get<int>();
      for (const auto& [channel, e] : field(r, "energy_j").items()) {
        rs.energy_j.emplace(channel, e.get<double>());
      }
      rs.bytes = field(r, "bytes").get<std::uint64_t>();
      rs.duration_s = number(r, "duration_s");
      rs.network_source = field(r, "network_source").get<std::string>();
      unit.runs.push_back(std::move(rs));
    }
    doc.units.emplace(name, std::move(unit));
  }
  return doc;
}

}  // namespace

std::string report_to_csv(const ReportDocument& doc) {
  std::string out =
      "configuration,unit,estimated,channel,energy_mean_j,energy_sample_std_j,n,bytes_mean,"
      "duration_mean_s,emissions_total_kgco2e\n";
  for (const auto& [name, u] : doc.units) {
    for (const auto& [channel, s] : u.stats.energy_j) {
      out += csv_field(doc.configuration.label) + ',' + csv_field(name) + ',' +
             (u.estimated ? "true" : "false") + ',' + csv_field(channel) + ',' +
             csv_number(s.mean) + ',' + (s.sample_std ? csv_number(*s.sample_std) : "") + ',' +
             std::to_string(s.n) + ',' + csv_number(u.stats.bytes.mean) + ',' +
             csv_number(u.stats.duration_s.mean) + ',' +
             (u.emissions ? csv_number(u.emissions->total) : "") + '\n';
    }
  }
  return out;
}

nlohmann::json to_json(const ComparisonReport& report, const ComparisonOptions& options) {
  nlohmann::json units = nlohmann::json::object();
  for (const auto& [name, d] : report.per_unit) {
    nlohmann::json rel = nlohmann::json::object();
    nlohmann::json welch = nlohmann::json::object();
    for (const auto& [c, v] : d.relative) rel[c] = opt(v);
    for (const auto& [c, v] : d.welch_t) welch[c] = opt(v);
    nlohmann::json u{{"delta_energy_j", d.energy_j},
                     {"relative_delta", rel},
                     {"welch_t", welch},
                     {"delta_bytes", d.bytes},
                     {"relative_delta_bytes", opt(d.bytes_relative)},
                     {"delta_emissions_kgco2e",
                      d.emissions_kgco2e ? nlohmann::json(*d.emissions_kgco2e)
                                         : nlohmann::json(nullptr)}};
    if (options.t_threshold) {
      nlohmann::json sig = nlohmann::json::object();
      for (const auto& [c, v] : d.welch_t) {
        sig[c] = v ? nlohmann::json(std::abs(*v) > *options.t_threshold) : nlohmann::json(nullptr);
      }
      u["exceeds_t_threshold"] = sig;
    }
    units[name] = std::move(u);
  }
  nlohmann::json j{{"schema_version", kSchemaVersion},
                   {"kind", "comparison"},
                   {"left", report.left},
                   {"right", report.right},
                   {"sign_convention", "delta = right - left (B - A); relative = delta / left mean"},
                   {"units", units}};
  if (options.t_threshold) j["t_threshold"] = *options.t_threshold;
  return j;
}

nlohmann::json to_json(const AnnualTotals& totals, double per_interaction_kwh,
                       double per_interaction_kgco2e, double daily_volume) {
  return {{"schema_version", kSchemaVersion},
          {"kind", "extrapolation"},
          {"per_interaction_energy_kwh", per_interaction_kwh},
          {"per_interaction_emissions_kgco2e", per_interaction_kgco2e},
          {"daily_volume_interactions", daily_volume},
          {"days_per_year", kDaysPerYear},
          {"annual_energy_kwh", totals.energy_kwh},
          {"annual_emissions_kgco2e", totals.emissions_kgco2e}};
}

std::string dump_document(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

}  // namespace ecotrace
