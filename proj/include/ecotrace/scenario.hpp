#pragma once

// Scenario files, driver supervision, and campaign orchestration.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ecotrace/model.hpp"
#include "ecotrace/sampling.hpp"

namespace ecotrace {

inline constexpr int kDefaultRunsPerUnit = 5;
inline constexpr Millis kDefaultCooldown{5000};
inline constexpr double kDurationTolerance = 0.10;
inline constexpr double kDriverTimeoutFactor = 2.0;

struct ScenarioSpec {
  std::vector<std::string> services;
  std::vector<Configuration> configurations;
  std::vector<FunctionalUnit> units;
  int n_runs = kDefaultRunsPerUnit;
  Millis sampling_interval = kDefaultSamplingInterval;
  std::string driver_command;
  /// Pause between consecutive runs.
  Millis cooldown = kDefaultCooldown;
  /// Seeds synthetic waveform noise; runs derive their own seed from it.
  std::uint64_t seed = 0;
  /// Unit whose mean machine power is used as the idle baseline.
  std::string idle_unit = "Idle";
  ProviderSpec power;
  /// Per-configuration power provider overrides.
  std::map<std::string, ProviderSpec, std::less<>> power_overrides;
  /// Fallback network source when the driver reports no NET lines.
  std::optional<ProviderSpec> network;
  /// Directory of the scenario file; relative paths resolve against it.
  std::filesystem::path base_dir;

  const FunctionalUnit* find_unit(std::string_view name) const;
  const Configuration* find_configuration(std::string_view label) const;
  const ProviderSpec& power_for(std::string_view config_label) const;
  std::vector<const FunctionalUnit*> basic_units() const;
  std::vector<const FunctionalUnit*> composite_units() const;
};

/// Parses and validates scenario JSON. Composite target durations default
/// to the sum of their members.
ScenarioSpec parse_scenario(std::string_view content, const std::filesystem::path& base_dir = {});
ScenarioSpec load_scenario(const std::filesystem::path& path);
nlohmann::json to_json(const ScenarioSpec& spec);

/// Per-run seed for synthetic providers. Independent of the configuration
/// so identical waveforms produce identical traces across configurations.
std::uint64_t run_seed(std::uint64_t scenario_seed, std::string_view unit, int run_index);

struct RunOptions {
  std::chrono::milliseconds ready_timeout{10000};
};

/// Launches the driver, sends RUN, samples between the first STEP START and
/// the last STEP END, and returns the measured record.
RunRecord run_unit(const FunctionalUnit& unit, const Configuration& config,
                   const ScenarioSpec& spec, int run_index, const RunOptions& options = {});

struct CampaignOptions {
  bool keep_going = false;
  std::optional<Millis> cooldown;
  std::function<void(const std::string&)> progress;
  RunOptions run;
};

/// Runs n_runs of every basic unit sequentially, run-major (all units for
/// run 1, then run 2, ...).
CampaignRecord run_campaign(const ScenarioSpec& spec, const Configuration& config,
                            const CampaignOptions& options = {});

}  // namespace ecotrace
