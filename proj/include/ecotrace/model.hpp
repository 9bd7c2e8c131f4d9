#pragma once

// Domain types shared by every module, plus unit conversions and
// factor-file validation.

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ecotrace {

/// Monotonic milliseconds from an arbitrary per-run origin.
using Millis = std::chrono::milliseconds;

inline constexpr std::string_view kChannelCpu = "cpu";
inline constexpr std::string_view kChannelMemory = "memory";
inline constexpr std::string_view kChannelMachine = "machine";
inline constexpr std::array<std::string_view, 3> kReservedChannels{kChannelCpu, kChannelMemory,
                                                                   kChannelMachine};

inline constexpr double kJoulesPerKwh = 3.6e6;
/// SI decimal gigabyte.
inline constexpr double kBytesPerGb = 1e9;

struct FunctionalUnit {
  std::string name;
  std::vector<std::string> steps;
  double target_duration_s = 0.0;
  /// Basic unit names; empty for basic units.
  std::vector<std::string> composite_of;

  bool is_composite() const noexcept { return !composite_of.empty(); }
};

struct Configuration {
  std::string label;
  bool ad_blocker = false;
  bool cookie_blocking = false;
  std::string provider;
};

/// Channel name -> watts.
using ChannelPower = std::map<std::string, double, std::less<>>;

struct PowerSample {
  Millis t{0};
  ChannelPower channels;
};

struct NetworkCounters {
  Millis t{0};
  std::uint64_t bytes_in = 0;
  std::uint64_t bytes_out = 0;
};

struct ResourceTrace {
  std::vector<PowerSample> power;
  std::vector<NetworkCounters> network;
  Millis start_t{0};
  Millis end_t{0};
};

/// Throws Error if any ResourceTrace invariant is violated.
void validate_trace(const ResourceTrace& trace);

struct EmissionFactors {
  double grid_intensity = 0.0;           // kgCO2e / kWh
  double network_use_per_gb = 0.0;       // kgCO2e / GB
  double server_use_per_gb = 0.0;        // kgCO2e / GB
  double network_embodied_per_gb = 0.0;  // kgCO2e / GB
  double server_embodied_per_gb = 0.0;   // kgCO2e / GB
  std::string source_label;

  friend bool operator==(const EmissionFactors&, const EmissionFactors&) = default;
};

struct MachineProfile {
  double embodied_total_kgco2e = 0.0;
  double lifetime_s = 1.0;
  double usage_share = 0.0;

  friend bool operator==(const MachineProfile&, const MachineProfile&) = default;
};

enum class NetworkSource { driver, replay, sensor, synthetic };
std::string_view to_string(NetworkSource source) noexcept;

struct ChannelEnergy {
  double joules = 0.0;
  /// Channel was missing from some samples; integrated over the
  /// sub-intervals where it was present.
  bool partial = false;
};
using ChannelEnergies = std::map<std::string, ChannelEnergy, std::less<>>;

struct RunRecord {
  std::string unit;
  std::string configuration;
  int run_index = 0;
  ResourceTrace trace;
  ChannelEnergies energy_j;
  std::uint64_t bytes_total = 0;
  double duration_s = 0.0;
  NetworkSource network_source = NetworkSource::synthetic;
  /// Run window on the harness monotonic clock; used to check that runs
  /// never overlap.
  Millis window_start{0};
  Millis window_end{0};
  /// Wall-clock start, metadata only.
  std::string wall_clock_utc;
};

struct RunFailure {
  std::string unit;
  int run_index = 0;
  std::string kind;
  std::string message;
};

struct CampaignRecord {
  Configuration configuration;
  /// Unit name -> runs in execution order.
  std::map<std::string, std::vector<RunRecord>, std::less<>> runs;
  int n_runs_per_unit = 5;
  std::vector<RunFailure> failures;

  bool complete() const;
};

// Conversions. All throw Error{invalid_quantity} on negative or non-finite input.
double joules_to_kwh(double joules);
double kwh_to_joules(double kwh);
double bytes_to_gb(double bytes);
double gb_to_bytes(double gb);

/// Parses an already-decoded factor document. Every field is mandatory.
EmissionFactors validate_factors(const nlohmann::json& raw);
EmissionFactors load_factors(const std::filesystem::path& path);
nlohmann::json to_json(const EmissionFactors& factors);

MachineProfile validate_machine(const nlohmann::json& raw);
MachineProfile load_machine(const std::filesystem::path& path);
nlohmann::json to_json(const MachineProfile& machine);

/// Reads a whole file; throws Error{io} naming the path.
std::string read_text_file(const std::filesystem::path& path);
/// Reads and decodes a JSON file; syntax errors are validation errors.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace ecotrace
