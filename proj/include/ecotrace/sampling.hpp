#pragma once

// Power and network providers, the run clock, and the sampler that turns
// provider polls into a ResourceTrace.

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ecotrace/model.hpp"

namespace ecotrace {

inline constexpr Millis kMinSamplingInterval{10};
inline constexpr Millis kDefaultSamplingInterval{100};

/// Cross-thread stop request. `at` is the last admissible sample time
/// relative to the sampling origin; without it sampling stops at once.
class StopSignal {
 public:
  StopSignal() = default;
  explicit StopSignal(Millis at) { request_stop(at); }

  void request_stop(std::optional<Millis> at = std::nullopt);
  bool stop_requested() const;
  std::optional<Millis> stop_time() const;

  /// Blocks until the steady-clock deadline passes or a stop is requested.
  void wait_until(std::chrono::steady_clock::time_point deadline) const;

 private:
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  bool requested_ = false;
  std::optional<Millis> at_;
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Millis now() const = 0;
  /// Returns at `t` or earlier if `stop` fires.
  virtual void wait_until(Millis t, const StopSignal& stop) = 0;
};

/// CLOCK_MONOTONIC milliseconds. Drivers timestamp events on the same clock.
Millis monotonic_now();

class SteadyClock final : public Clock {
 public:
  Millis now() const override { return monotonic_now(); }
  void wait_until(Millis t, const StopSignal& stop) override;
};

/// Time advances only when waited on; sampling runs as fast as the CPU allows.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(Millis start = Millis{0}) : now_(start) {}
  Millis now() const override { return now_; }
  void wait_until(Millis t, const StopSignal&) override {
    if (t > now_) now_ = t;
  }

 private:
  Millis now_;
};

class PowerProvider {
 public:
  virtual ~PowerProvider() = default;

  /// Sample at time `t` (relative to the sampling origin). Timestamps must
  /// strictly increase across calls.
  PowerSample poll(Millis t);

  /// Providers with their own timeline (replay) dictate poll times.
  virtual bool scheduled() const { return false; }
  /// Next time this provider wants to be polled; nullopt once exhausted.
  virtual std::optional<Millis> next_scheduled() const { return std::nullopt; }
  /// Channels this provider is expected to report.
  virtual std::vector<std::string> channels() const = 0;

 protected:
  virtual PowerSample do_poll(Millis t) = 0;

 private:
  std::optional<Millis> last_t_;
};

class NetworkProvider {
 public:
  virtual ~NetworkProvider() = default;

  /// Cumulative counters at `t`. Throws monotonicity errors naming the
  /// sample index when a counter decreases.
  NetworkCounters poll(Millis t);

  virtual bool scheduled() const { return false; }
  virtual std::optional<Millis> next_scheduled() const { return std::nullopt; }

 protected:
  virtual NetworkCounters do_poll(Millis t) = 0;

 private:
  std::optional<NetworkCounters> last_;
  std::size_t polls_ = 0;
};

enum class WaveShape { constant, ramp, step };

struct WaveformSpec {
  WaveShape shape = WaveShape::constant;
  double amplitude_start_w = 0.0;
  double amplitude_end_w = 0.0;
  /// Ramp: time to go from start to end amplitude, then holds. Step: half
  /// period of the square wave.
  double period_s = 1.0;
  /// Uniform noise half-width, deterministic in (seed, channel, t).
  double noise_w = 0.0;

  double value_at(Millis t) const;
};

void validate_waveform(const WaveformSpec& spec, std::string_view channel);

class SyntheticPowerProvider final : public PowerProvider {
 public:
  SyntheticPowerProvider(std::map<std::string, WaveformSpec, std::less<>> waveforms,
                         std::uint64_t seed = 0);
  std::vector<std::string> channels() const override;

 protected:
  PowerSample do_poll(Millis t) override;

 private:
  std::map<std::string, WaveformSpec, std::less<>> waveforms_;
  std::uint64_t seed_;
};

/// Counters grow linearly: floor(rate * t).
class SyntheticNetworkProvider final : public NetworkProvider {
 public:
  SyntheticNetworkProvider(double bytes_in_per_s, double bytes_out_per_s);

 protected:
  NetworkCounters do_poll(Millis t) override;

 private:
  double in_rate_;
  double out_rate_;
};

/// Parsed replay file.
struct ReplayTrace {
  std::vector<PowerSample> power;
  std::vector<NetworkCounters> network;
};

/// Parses the newline-delimited replay format; errors name the line number.
ReplayTrace parse_replay(std::string_view content);
ReplayTrace load_replay(const std::filesystem::path& path);
/// Serializes a trace in replay format. Values round-trip exactly.
std::string format_replay(const ResourceTrace& trace);

/// Replays recorded power. When driven by its own schedule the output is
/// the recording itself; when polled on a grid it holds the latest record.
class ReplayPowerProvider final : public PowerProvider {
 public:
  explicit ReplayPowerProvider(std::vector<PowerSample> samples);
  bool scheduled() const override { return true; }
  std::optional<Millis> next_scheduled() const override;
  std::vector<std::string> channels() const override;

 protected:
  PowerSample do_poll(Millis t) override;

 private:
  std::vector<PowerSample> samples_;
  std::size_t cursor_ = 0;
};

class ReplayNetworkProvider final : public NetworkProvider {
 public:
  explicit ReplayNetworkProvider(std::vector<NetworkCounters> samples);
  bool scheduled() const override { return true; }
  std::optional<Millis> next_scheduled() const override;

 protected:
  NetworkCounters do_poll(Millis t) override;

 private:
  std::vector<NetworkCounters> samples_;
  std::size_t cursor_ = 0;
};

/// Counters fed from driver NET lines by the supervising thread.
class DriverNetworkProvider final : public NetworkProvider {
 public:
  void report(std::uint64_t bytes_in, std::uint64_t bytes_out);
  bool any_reported() const;
  NetworkCounters latest() const;

 protected:
  NetworkCounters do_poll(Millis t) override;

 private:
  mutable std::mutex mutex_;
  std::uint64_t in_ = 0;
  std::uint64_t out_ = 0;
  bool reported_ = false;
};

/// Linux powercap (RAPL) energy counters: package -> cpu, dram -> memory,
/// and their sum -> machine. Throws ProviderError when no zone is readable.
class RaplPowerProvider final : public PowerProvider {
 public:
  explicit RaplPowerProvider(std::filesystem::path root = "/sys/class/powercap");
  std::vector<std::string> channels() const override;

 protected:
  PowerSample do_poll(Millis t) override;

 private:
  struct Zone {
    std::string channel;
    std::filesystem::path energy_file;
    double max_range_uj = 0.0;
    double last_uj = 0.0;
  };
  std::vector<Zone> zones_;
  std::chrono::steady_clock::time_point last_read_;
};

/// Sum of /proc/net/dev counters over non-loopback interfaces, relative to
/// construction time.
class PlatformNetworkProvider final : public NetworkProvider {
 public:
  explicit PlatformNetworkProvider(std::filesystem::path dev_file = "/proc/net/dev");

 protected:
  NetworkCounters do_poll(Millis t) override;

 private:
  std::pair<std::uint64_t, std::uint64_t> read_totals() const;
  std::filesystem::path dev_file_;
  std::uint64_t base_in_ = 0;
  std::uint64_t base_out_ = 0;
};

enum class ProviderKind { sensor, synthetic, replay };
std::string_view to_string(ProviderKind kind) noexcept;

/// Declarative provider choice as it appears in scenario files.
struct ProviderSpec {
  ProviderKind kind = ProviderKind::sensor;
  /// synthetic power
  std::map<std::string, WaveformSpec, std::less<>> waveforms;
  /// synthetic network
  double bytes_in_per_s = 0.0;
  double bytes_out_per_s = 0.0;
  /// replay; relative paths resolve against the scenario directory
  std::filesystem::path replay_path;
};

/// `role` is "power" or "network"; it selects which parameters are required.
ProviderSpec parse_provider_spec(const nlohmann::json& raw, std::string_view role);
nlohmann::json to_json(const ProviderSpec& spec, std::string_view role);

std::unique_ptr<PowerProvider> make_power_provider(const ProviderSpec& spec, std::uint64_t seed,
                                                   const std::filesystem::path& base_dir);
std::unique_ptr<NetworkProvider> make_network_provider(const ProviderSpec& spec,
                                                       const std::filesystem::path& base_dir);

/// Polls both providers until `stop` resolves (or every scheduled provider
/// is exhausted). Grid providers are polled at multiples of `interval`
/// from the origin; recorded timestamps are the scheduled ones, relative
/// to `origin` (defaults to clock.now() at entry).
ResourceTrace sample_run(PowerProvider& power, NetworkProvider& network, Millis interval,
                         const StopSignal& stop, Clock& clock,
                         std::optional<Millis> origin = std::nullopt);

}  // namespace ecotrace
