#pragma once

// Report documents: the self-describing JSON written by `run`, read back by
// `compare`. Every numeric key carries its unit (energy_j, bytes,
// duration_s, emissions_kgco2e, power_w).

#include <optional>
#include <string>
#include <vector>

#include "ecotrace/analysis.hpp"
#include "ecotrace/emissions.hpp"
#include "ecotrace/model.hpp"
#include "ecotrace/scenario.hpp"

namespace ecotrace {

inline constexpr std::string_view kSchemaVersion = "1.0";

struct RunSummary {
  int run_index = 0;
  std::map<std::string, double, std::less<>> energy_j;
  std::uint64_t bytes = 0;
  double duration_s = 0.0;
  std::string network_source;

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

struct UnitReport {
  UnitStats stats;
  bool estimated = false;
  std::vector<std::string> composite_of;
  std::optional<IdleAdjustment> machine_idle_adjusted;
  std::optional<EmissionBreakdown> emissions;
  EmissionUncertainty emissions_std;
  std::vector<std::string> absent_channels;
  std::vector<RunSummary> runs;
};

struct ReportDocument {
  std::string schema_version{kSchemaVersion};
  std::optional<std::string> generated_at;
  nlohmann::json scenario;
  Configuration configuration;
  int n_runs_per_unit = 0;
  bool complete = true;
  std::vector<RunFailure> failures;
  EmissionFactors factors;
  MachineProfile machine;
  std::optional<double> idle_power_w;
  std::map<std::string, UnitReport, std::less<>> units;
  std::vector<std::string> flags;

  CampaignSummary summary() const;
};

/// Aggregates a campaign, estimates composites, applies the idle baseline,
/// and attaches emission breakdowns.
ReportDocument build_report(const ScenarioSpec& spec, const CampaignRecord& campaign,
                            const EmissionFactors& factors, const MachineProfile& machine);

nlohmann::json to_json(const ReportDocument& report);
/// Throws Error{validation} for documents that do not follow the schema.
ReportDocument report_from_json(const nlohmann::json& doc);

/// Flat per-unit, per-channel rows for spreadsheets.
std::string report_to_csv(const ReportDocument& report);

struct ComparisonOptions {
  /// |welch_t| above this marks a channel as significant.
  std::optional<double> t_threshold;
};

nlohmann::json to_json(const ComparisonReport& report, const ComparisonOptions& options = {});

nlohmann::json to_json(const AnnualTotals& totals, double per_interaction_kwh,
                       double per_interaction_kgco2e, double daily_volume);

/// Pretty-printed JSON with a trailing newline.
std::string dump_document(const nlohmann::json& doc);

}  // namespace ecotrace
