#include "ecotrace/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "ecotrace/error.hpp"

namespace ecotrace {

Summary summarize(std::span<const double> values) {
  // Welford's single-pass update.
  Summary s;
  double m2 = 0.0;
  for (double x : values) {
    ++s.n;
    const double delta = x - s.mean;
    s.mean += delta / static_cast<double>(s.n);
    m2 += delta * (x - s.mean);
  }
  if (s.n >= 2) s.sample_std = std::sqrt(std::max(0.0, m2) / static_cast<double>(s.n - 1));
  return s;
}

ChannelEnergies integrate_energy(const ResourceTrace& trace) {
  if (trace.power.size() < 2) {
    throw Error(ErrorKind::trace_too_short,
                "cannot integrate " + std::to_string(trace.power.size()) +
                    " power sample(s); need >= 2");
  }
  ChannelEnergies out;
  for (const auto& s : trace.power)
    for (const auto& [channel, w] : s.channels) out.try_emplace(channel);

  for (auto& [channel, energy] : out) {
    for (std::size_t i = 0; i < trace.power.size(); ++i) {
      const auto& cur = trace.power[i];
      const auto b = cur.channels.find(channel);
      if (b == cur.channels.end()) {
        energy.partial = true;
        continue;
      }
      if (i == 0) continue;
      const auto& prev = trace.power[i - 1];
      const auto a = prev.channels.find(channel);
      if (a == prev.channels.end()) continue;
      const double dt_s = static_cast<double>((cur.t - prev.t).count()) / 1000.0;
      energy.joules += 0.5 * (a->second + b->second) * dt_s;
    }
  }
  return out;
}

double idle_power_w(const UnitStats& idle_stats) {
  const auto it = idle_stats.energy_j.find(kChannelMachine);
  if (it == idle_stats.energy_j.end()) {
    throw Error(ErrorKind::adjustment_unavailable,
                "idle unit '" + idle_stats.unit + "' has no machine-channel energy", "machine");
  }
  if (!(idle_stats.duration_s.mean > 0.0)) {
    throw Error(ErrorKind::adjustment_unavailable,
                "idle unit '" + idle_stats.unit + "' has zero duration", "duration_s");
  }
  return it->second.mean / idle_stats.duration_s.mean;
}

IdleAdjustment idle_adjust(double unit_energy_j, const UnitStats& idle_stats, double duration_s) {
  if (!std::isfinite(unit_energy_j) || unit_energy_j < 0.0) {
    throw Error(ErrorKind::invalid_quantity, "unit energy must be finite and >= 0", "energy_j");
  }
  if (!std::isfinite(duration_s) || duration_s < 0.0) {
    throw Error(ErrorKind::invalid_quantity, "duration must be finite and >= 0", "duration_s");
  }
  const double baseline = idle_power_w(idle_stats) * duration_s;
  IdleAdjustment adj{unit_energy_j, unit_energy_j - baseline, false};
  if (adj.adjusted_j < 0.0) {
    adj.adjusted_j = 0.0;
    adj.floored = true;
  }
  return adj;
}

UnitStats aggregate_runs(std::span<const RunRecord> records) {
  if (records.empty()) throw Error(ErrorKind::aggregation, "no runs to aggregate");
  const auto& unit = records.front().unit;
  const auto& config = records.front().configuration;
  std::map<std::string, std::vector<double>, std::less<>> energies;
  std::vector<double> bytes;
  std::vector<double> durations;
  UnitStats stats;
  stats.unit = unit;
  for (const auto& r : records) {
    if (r.unit != unit) {
      throw Error(ErrorKind::aggregation,
                  "cannot aggregate runs of different units ('" + unit + "', '" + r.unit + "')",
                  r.unit);
    }
    if (r.configuration != config) {
      throw Error(ErrorKind::aggregation,
                  "cannot aggregate runs of different configurations ('" + config + "', '" +
                      r.configuration + "')",
                  r.configuration);
    }
    for (const auto& [channel, e] : r.energy_j) {
      energies[channel].push_back(e.joules);
      if (e.partial) stats.partial_channels.insert(channel);
    }
    bytes.push_back(static_cast<double>(r.bytes_total));
    durations.push_back(r.duration_s);
  }
  for (const auto& [channel, values] : energies) {
    stats.energy_j.emplace(channel, summarize(values));
    if (values.size() != records.size()) stats.partial_channels.insert(channel);
  }
  stats.bytes = summarize(bytes);
  stats.duration_s = summarize(durations);
  return stats;
}

namespace {

/// Summary of a sum of independent quantities.
Summary add_independent(const std::vector<const Summary*>& parts) {
  Summary out;
  double variance = 0.0;
  bool std_defined = true;
  out.n = parts.front()->n;
  for (const auto* p : parts) {
    out.mean += p->mean;
    out.n = std::min(out.n, p->n);
    if (p->sample_std) variance += *p->sample_std * *p->sample_std;
    else std_defined = false;
  }
  if (std_defined) out.sample_std = std::sqrt(variance);
  return out;
}

}  // namespace

UnitStats compose_units(const std::map<std::string, UnitStats, std::less<>>& stats,
                        const FunctionalUnit& composite) {
  if (composite.composite_of.empty()) {
    throw Error(ErrorKind::composition, "composite '" + composite.name + "' has no members",
                composite.name);
  }
  std::vector<const UnitStats*> members;
  for (const auto& name : composite.composite_of) {
    auto it = stats.find(name);
    if (it == stats.end()) {
      throw Error(ErrorKind::composition,
                  "composite '" + composite.name + "' member '" + name + "' has no statistics",
                  name);
    }
    members.push_back(&it->second);
  }

  UnitStats out;
  out.unit = composite.name;
  // Only channels measured for every member can be summed.
  for (const auto& [channel, first] : members.front()->energy_j) {
    std::vector<const Summary*> parts;
    for (const auto* m : members) {
      auto it = m->energy_j.find(channel);
      if (it == m->energy_j.end()) break;
      parts.push_back(&it->second);
    }
    if (parts.size() == members.size()) out.energy_j.emplace(channel, add_independent(parts));
    else out.partial_channels.insert(channel);
  }
  std::vector<const Summary*> bytes;
  std::vector<const Summary*> durations;
  for (const auto* m : members) {
    bytes.push_back(&m->bytes);
    durations.push_back(&m->duration_s);
    out.partial_channels.insert(m->partial_channels.begin(), m->partial_channels.end());
    for (const auto& [channel, s] : m->energy_j)
      if (!out.energy_j.contains(channel)) out.partial_channels.insert(channel);
  }
  out.bytes = add_independent(bytes);
  out.duration_s = add_independent(durations);
  return out;
}

std::optional<double> welch_t(const Summary& left, const Summary& right) {
  if (!left.sample_std || !right.sample_std || left.n == 0 || right.n == 0) return std::nullopt;
  const double diff = right.mean - left.mean;
  if (diff == 0.0) return 0.0;
  const double se = std::sqrt(*left.sample_std * *left.sample_std / static_cast<double>(left.n) +
                              *right.sample_std * *right.sample_std / static_cast<double>(right.n));
  if (se == 0.0) return std::nullopt;
  return diff / se;
}

namespace {

std::optional<double> relative(double delta, double left_mean) {
  if (left_mean > 0.0) return delta / left_mean;
  return std::nullopt;
}

}  // namespace

ComparisonReport compare(const CampaignSummary& left, const CampaignSummary& right) {
  ComparisonReport report;
  report.left = left.label;
  report.right = right.label;
  for (const auto& [unit, ls] : left.units) {
    auto rit = right.units.find(unit);
    if (rit == right.units.end()) continue;
    const auto& rs = rit->second;
    UnitDelta d;
    for (const auto& [channel, lsum] : ls.energy_j) {
      auto rc = rs.energy_j.find(channel);
      if (rc == rs.energy_j.end()) continue;
      const double delta = rc->second.mean - lsum.mean;
      d.energy_j.emplace(channel, delta);
      d.relative.emplace(channel, relative(delta, lsum.mean));
      d.welch_t.emplace(channel, welch_t(lsum, rc->second));
    }
    d.bytes = rs.bytes.mean - ls.bytes.mean;
    d.bytes_relative = relative(d.bytes, ls.bytes.mean);
    auto le = left.emissions_kgco2e.find(unit);
    auto re = right.emissions_kgco2e.find(unit);
    if (le != left.emissions_kgco2e.end() && re != right.emissions_kgco2e.end()) {
      ComponentMap components;
      for (const auto& [name, lv] : le->second) {
        auto rv = re->second.find(name);
        if (rv != re->second.end()) components.emplace(name, rv->second - lv);
      }
      d.emissions_kgco2e = std::move(components);
    }
    report.per_unit.emplace(unit, std::move(d));
  }
  if (report.per_unit.empty()) {
    throw Error(ErrorKind::comparison,
                "campaigns '" + left.label + "' and '" + right.label + "' share no unit");
  }
  return report;
}

AnnualTotals extrapolate(double per_interaction_kwh, double per_interaction_kgco2e,
                         double daily_volume) {
  auto check = [](double v, const char* what) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorKind::invalid_quantity, std::string(what) + " must be finite and >= 0",
                  what);
    }
  };
  check(per_interaction_kwh, "per_interaction_kwh");
  check(per_interaction_kgco2e, "per_interaction_kgco2e");
  check(daily_volume, "daily_volume");
  return {per_interaction_kwh * daily_volume * kDaysPerYear,
          per_interaction_kgco2e * daily_volume * kDaysPerYear};
}

}  // namespace ecotrace
