#include "ecotrace/emissions.hpp"

#include <cmath>

#include "ecotrace/error.hpp"

namespace ecotrace {

namespace {

void require_non_negative(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0) {
    throw Error(ErrorKind::invalid_quantity, std::string(what) + " must be finite and >= 0",
                what);
  }
}

double sum_components(const EmissionBreakdown& b) {
  return b.user_use + b.network_use + b.server_use + b.network_embodied_eol +
         b.server_embodied_eol + b.user_embodied;
}

}  // namespace

ComponentMap EmissionBreakdown::components() const {
  return {{"user_use", user_use},
          {"network_use", network_use},
          {"server_use", server_use},
          {"network_embodied_eol", network_embodied_eol},
          {"server_embodied_eol", server_embodied_eol},
          {"user_embodied", user_embodied},
          {"total", total}};
}

EmissionBreakdown EmissionBreakdown::from_components(const ComponentMap& c) {
  auto get = [&](const char* key) {
    auto it = c.find(key);
    if (it == c.end()) {
      throw Error(ErrorKind::validation, std::string("missing emission component '") + key + "'",
                  key);
    }
    return it->second;
  };
  EmissionBreakdown b;
  b.user_use = get("user_use");
  b.network_use = get("network_use");
  b.server_use = get("server_use");
  b.network_embodied_eol = get("network_embodied_eol");
  b.server_embodied_eol = get("server_embodied_eol");
  b.user_embodied = get("user_embodied");
  b.total = get("total");
  return b;
}

double use_phase_emissions(double energy_kwh, const EmissionFactors& factors) {
  require_non_negative(energy_kwh, "energy_kwh");
  return energy_kwh * factors.grid_intensity;
}

NetworkServerEmissions network_server_emissions(double bytes, const EmissionFactors& factors) {
  require_non_negative(bytes, "bytes");
  const double gb = bytes_to_gb(bytes);
  return {gb * factors.network_use_per_gb, gb * factors.server_use_per_gb};
}

EmbodiedEolEmissions embodied_eol_emissions(double bytes, const EmissionFactors& factors) {
  require_non_negative(bytes, "bytes");
  const double gb = bytes_to_gb(bytes);
  return {gb * factors.network_embodied_per_gb, gb * factors.server_embodied_per_gb};
}

double user_embodied_share(const MachineProfile& machine, double duration_s) {
  require_non_negative(duration_s, "duration_s");
  return machine.embodied_total_kgco2e * machine.usage_share * duration_s / machine.lifetime_s;
}

EmissionBreakdown total_footprint(const UnitStats& stats, const EmissionFactors& factors,
                                  const MachineProfile& machine) {
  const auto it = stats.energy_j.find(kChannelMachine);
  if (it == stats.energy_j.end()) {
    throw Error(ErrorKind::validation,
                "unit '" + stats.unit + "' has no machine-channel energy; emissions unavailable",
                "machine");
  }
  EmissionBreakdown b;
  b.user_use = use_phase_emissions(joules_to_kwh(it->second.mean), factors);
  const auto ns = network_server_emissions(stats.bytes.mean, factors);
  b.network_use = ns.network_use;
  b.server_use = ns.server_use;
  const auto ee = embodied_eol_emissions(stats.bytes.mean, factors);
  b.network_embodied_eol = ee.network_embodied_eol;
  b.server_embodied_eol = ee.server_embodied_eol;
  b.user_embodied = user_embodied_share(machine, stats.duration_s.mean);
  b.total = sum_components(b);
  return b;
}

EmissionUncertainty footprint_uncertainty(const UnitStats& stats, const EmissionFactors& factors,
                                          const MachineProfile& machine) {
  EmissionUncertainty u;
  const auto it = stats.energy_j.find(kChannelMachine);
  if (it != stats.energy_j.end() && it->second.sample_std) {
    u.user_use = *it->second.sample_std / kJoulesPerKwh * factors.grid_intensity;
  }
  if (stats.bytes.sample_std) {
    const double gb = *stats.bytes.sample_std / kBytesPerGb;
    u.network_use = gb * factors.network_use_per_gb;
    u.server_use = gb * factors.server_use_per_gb;
    u.network_embodied_eol = gb * factors.network_embodied_per_gb;
    u.server_embodied_eol = gb * factors.server_embodied_per_gb;
  }
  if (stats.duration_s.sample_std) {
    u.user_embodied = user_embodied_share(machine, *stats.duration_s.sample_std);
  }
  // Traffic-derived components share one input and add linearly; energy,
  // traffic, and duration are combined in quadrature.
  std::optional<double> traffic;
  if (u.network_use) {
    traffic = *u.network_use + *u.server_use + *u.network_embodied_eol + *u.server_embodied_eol;
  }
  double sq = 0.0;
  bool any = false;
  for (const auto& c : {u.user_use, traffic, u.user_embodied}) {
    if (c) {
      sq += *c * *c;
      any = true;
    }
  }
  if (any) u.total = std::sqrt(sq);
  return u;
}

}  // namespace ecotrace
