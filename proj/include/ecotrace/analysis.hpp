#pragma once

// Pure computations over recorded runs: integration, idle adjustment,
// statistics, composition, comparison, and extrapolation.

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ecotrace/model.hpp"

namespace ecotrace {

/// Mean and sample standard deviation (n - 1 denominator). The standard
/// deviation is undefined (nullopt) for n = 1.
struct Summary {
  double mean = 0.0;
  std::optional<double> sample_std;
  std::size_t n = 0;

  friend bool operator==(const Summary&, const Summary&) = default;
};

Summary summarize(std::span<const double> values);

struct UnitStats {
  std::string unit;
  std::map<std::string, Summary, std::less<>> energy_j;
  Summary bytes;
  Summary duration_s;
  /// Channels missing from at least one sample in at least one run.
  std::set<std::string, std::less<>> partial_channels;

  friend bool operator==(const UnitStats&, const UnitStats&) = default;
};

/// Trapezoidal rule per channel between consecutive samples. Intervals
/// where a channel is absent at either end are skipped and the channel is
/// flagged partial.
ChannelEnergies integrate_energy(const ResourceTrace& trace);

struct IdleAdjustment {
  double raw_j = 0.0;
  double adjusted_j = 0.0;
  bool floored = false;
};

/// Mean idle machine power in watts: idle energy mean / idle duration mean.
double idle_power_w(const UnitStats& idle_stats);

IdleAdjustment idle_adjust(double unit_energy_j, const UnitStats& idle_stats, double duration_s);

UnitStats aggregate_runs(std::span<const RunRecord> records);

/// Sum of basic units under an independence assumption: means add,
/// variances add.
UnitStats compose_units(const std::map<std::string, UnitStats, std::less<>>& stats,
                        const FunctionalUnit& composite);

using ComponentMap = std::map<std::string, double, std::less<>>;

/// Per-unit stats of one campaign, plus emission components by name when
/// they were computed.
struct CampaignSummary {
  std::string label;
  std::map<std::string, UnitStats, std::less<>> units;
  std::map<std::string, ComponentMap, std::less<>> emissions_kgco2e;
};

struct UnitDelta {
  std::map<std::string, double, std::less<>> energy_j;
  /// delta / left mean; nullopt when left mean is 0.
  std::map<std::string, std::optional<double>, std::less<>> relative;
  /// Welch's t per channel; nullopt when either std is undefined or both
  /// std are zero with different means.
  std::map<std::string, std::optional<double>, std::less<>> welch_t;
  double bytes = 0.0;
  std::optional<double> bytes_relative;
  std::optional<ComponentMap> emissions_kgco2e;
};

struct ComparisonReport {
  std::string left;
  std::string right;
  /// Every delta is right - left.
  std::map<std::string, UnitDelta, std::less<>> per_unit;
};

/// Deltas for every unit present in both campaigns. Throws
/// Error{comparison} when they share no unit.
ComparisonReport compare(const CampaignSummary& left, const CampaignSummary& right);

std::optional<double> welch_t(const Summary& left, const Summary& right);

struct AnnualTotals {
  double energy_kwh = 0.0;
  double emissions_kgco2e = 0.0;
};

inline constexpr double kDaysPerYear = 365.0;

AnnualTotals extrapolate(double per_interaction_kwh, double per_interaction_kgco2e,
                         double daily_volume);

}  // namespace ecotrace
