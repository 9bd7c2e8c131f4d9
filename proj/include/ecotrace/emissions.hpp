#pragma once

// Energy and traffic to kgCO2e. Network and server components are
// allocated in proportion to bytes (average allocation), not metered.

#include "ecotrace/analysis.hpp"
#include "ecotrace/model.hpp"

namespace ecotrace {

struct EmissionBreakdown {
  double user_use = 0.0;
  double network_use = 0.0;
  double server_use = 0.0;
  double network_embodied_eol = 0.0;
  double server_embodied_eol = 0.0;
  double user_embodied = 0.0;
  double total = 0.0;

  /// Component name -> kgCO2e, including "total".
  ComponentMap components() const;
  static EmissionBreakdown from_components(const ComponentMap& components);
};

struct NetworkServerEmissions {
  double network_use = 0.0;
  double server_use = 0.0;
};

struct EmbodiedEolEmissions {
  double network_embodied_eol = 0.0;
  double server_embodied_eol = 0.0;
};

double use_phase_emissions(double energy_kwh, const EmissionFactors& factors);
NetworkServerEmissions network_server_emissions(double bytes, const EmissionFactors& factors);
EmbodiedEolEmissions embodied_eol_emissions(double bytes, const EmissionFactors& factors);

/// embodied_total * usage_share * duration / lifetime.
double user_embodied_share(const MachineProfile& machine, double duration_s);

/// Breakdown from the mean machine energy, bytes, and duration of `stats`.
/// Throws Error{validation} when the machine channel is missing.
EmissionBreakdown total_footprint(const UnitStats& stats, const EmissionFactors& factors,
                                  const MachineProfile& machine);

/// Linear propagation of the standard deviations of `stats` through each
/// component. Components whose input std is undefined are nullopt.
struct EmissionUncertainty {
  std::optional<double> user_use;
  std::optional<double> network_use;
  std::optional<double> server_use;
  std::optional<double> network_embodied_eol;
  std::optional<double> server_embodied_eol;
  std::optional<double> user_embodied;
  std::optional<double> total;
};

EmissionUncertainty footprint_uncertainty(const UnitStats& stats, const EmissionFactors& factors,
                                          const MachineProfile& machine);

}  // namespace ecotrace
