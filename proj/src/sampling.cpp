#include "ecotrace/sampling.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "ecotrace/error.hpp"

namespace ecotrace {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------- stop/clock

void StopSignal::request_stop(std::optional<Millis> at) {
  {
    std::lock_guard lock(mutex_);
    if (!requested_) {
      requested_ = true;
      at_ = at;
    }
  }
  cv_.notify_all();
}

bool StopSignal::stop_requested() const {
  std::lock_guard lock(mutex_);
  return requested_;
}

std::optional<Millis> StopSignal::stop_time() const {
  std::lock_guard lock(mutex_);
  return at_;
}

void StopSignal::wait_until(std::chrono::steady_clock::time_point deadline) const {
  std::unique_lock lock(mutex_);
  cv_.wait_until(lock, deadline, [this] { return requested_; });
}

Millis monotonic_now() {
  timespec ts{};
  clock_gettime(CLOCK_MONOTONIC, &ts);
  return Millis{static_cast<std::int64_t>(ts.tv_sec) * 1000 + ts.tv_nsec / 1'000'000};
}

void SteadyClock::wait_until(Millis t, const StopSignal& stop) {
  const auto delta = t - now();
  if (delta <= Millis{0}) return;
  stop.wait_until(std::chrono::steady_clock::now() + delta);
}

// ---------------------------------------------------------------- base polls

PowerSample PowerProvider::poll(Millis t) {
  if (last_t_ && t <= *last_t_) {
    throw Error(ErrorKind::monotonicity,
                "power poll at t=" + std::to_string(t.count()) + " ms is not after previous poll");
  }
  PowerSample sample = do_poll(t);
  sample.t = t;
  for (const auto& [channel, watts] : sample.channels) {
    if (!std::isfinite(watts) || watts < 0.0) {
      throw Error(ErrorKind::validation, "channel " + channel + " reported invalid power",
                  channel);
    }
  }
  last_t_ = t;
  return sample;
}

NetworkCounters NetworkProvider::poll(Millis t) {
  if (last_ && t <= last_->t) {
    throw Error(ErrorKind::monotonicity, "network poll at t=" + std::to_string(t.count()) +
                                             " ms is not after previous poll");
  }
  NetworkCounters c = do_poll(t);
  c.t = t;
  if (last_ && (c.bytes_in < last_->bytes_in || c.bytes_out < last_->bytes_out)) {
    throw Error(ErrorKind::monotonicity,
                "network counters decreased at sample index " + std::to_string(polls_),
                std::to_string(polls_));
  }
  last_ = c;
  ++polls_;
  return c;
}

// ---------------------------------------------------------------- synthetic

double WaveformSpec::value_at(Millis t) const {
  const double ts = static_cast<double>(t.count()) / 1000.0;
  switch (shape) {
    case WaveShape::constant:
      return amplitude_start_w;
    case WaveShape::ramp: {
      if (ts >= period_s) return amplitude_end_w;
      return amplitude_start_w + (amplitude_end_w - amplitude_start_w) * (ts / period_s);
    }
    case WaveShape::step: {
      const auto phase = static_cast<std::int64_t>(std::floor(ts / period_s));
      return phase % 2 == 0 ? amplitude_start_w : amplitude_end_w;
    }
  }
  return 0.0;
}

void validate_waveform(const WaveformSpec& spec, std::string_view channel) {
  const std::string ch(channel);
  auto check = [&](double v, const char* field) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorKind::validation,
                  "waveform for channel " + ch + ": " + field + " must be finite and >= 0", field);
    }
  };
  check(spec.amplitude_start_w, "amplitude_start_w");
  check(spec.amplitude_end_w, "amplitude_end_w");
  check(spec.noise_w, "noise_w");
  if (spec.shape != WaveShape::constant && !(spec.period_s > 0.0)) {
    throw Error(ErrorKind::validation, "waveform for channel " + ch + ": period_s must be > 0",
                "period_s");
  }
}

SyntheticPowerProvider::SyntheticPowerProvider(
    std::map<std::string, WaveformSpec, std::less<>> waveforms, std::uint64_t seed)
    : waveforms_(std::move(waveforms)), seed_(seed) {
  if (waveforms_.empty()) {
    throw Error(ErrorKind::validation, "synthetic provider needs at least one channel", "channels");
  }
  for (const auto& [channel, spec] : waveforms_) validate_waveform(spec, channel);
}

std::vector<std::string> SyntheticPowerProvider::channels() const {
  std::vector<std::string> out;
  for (const auto& [channel, spec] : waveforms_) out.push_back(channel);
  return out;
}

PowerSample SyntheticPowerProvider::do_poll(Millis t) {
  PowerSample sample;
  for (const auto& [channel, spec] : waveforms_) {
    double watts = spec.value_at(t);
    if (spec.noise_w > 0.0) {
      const std::uint64_t h =
          splitmix64(seed_ ^ splitmix64(fnv1a(channel) ^ static_cast<std::uint64_t>(t.count())));
      const double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0, 1)
      watts = std::max(0.0, watts + spec.noise_w * (2.0 * u - 1.0));
    }
    sample.channels.emplace(channel, watts);
  }
  return sample;
}

SyntheticNetworkProvider::SyntheticNetworkProvider(double bytes_in_per_s, double bytes_out_per_s)
    : in_rate_(bytes_in_per_s), out_rate_(bytes_out_per_s) {
  if (!std::isfinite(in_rate_) || in_rate_ < 0.0 || !std::isfinite(out_rate_) || out_rate_ < 0.0) {
    throw Error(ErrorKind::validation, "synthetic network rates must be finite and >= 0");
  }
}

NetworkCounters SyntheticNetworkProvider::do_poll(Millis t) {
  const double ts = std::max<double>(0.0, static_cast<double>(t.count()) / 1000.0);
  return {t, static_cast<std::uint64_t>(std::floor(in_rate_ * ts)),
          static_cast<std::uint64_t>(std::floor(out_rate_ * ts))};
}

// ---------------------------------------------------------------- replay

ReplayPowerProvider::ReplayPowerProvider(std::vector<PowerSample> samples)
    : samples_(std::move(samples)) {
  if (samples_.empty()) {
    throw ProviderError("replay file has no power samples", {"*"});
  }
}

std::optional<Millis> ReplayPowerProvider::next_scheduled() const {
  if (cursor_ >= samples_.size()) return std::nullopt;
  return samples_[cursor_].t;
}

std::vector<std::string> ReplayPowerProvider::channels() const {
  std::set<std::string> all;
  for (const auto& s : samples_)
    for (const auto& [c, w] : s.channels) all.insert(c);
  return {all.begin(), all.end()};
}

PowerSample ReplayPowerProvider::do_poll(Millis t) {
  if (t < samples_.front().t) {
    throw ProviderError("no replayed power sample at or before t=" + std::to_string(t.count()),
                        channels());
  }
  while (cursor_ < samples_.size() && samples_[cursor_].t <= t) ++cursor_;
  return samples_[cursor_ - 1];
}

ReplayNetworkProvider::ReplayNetworkProvider(std::vector<NetworkCounters> samples)
    : samples_(std::move(samples)) {}

std::optional<Millis> ReplayNetworkProvider::next_scheduled() const {
  if (cursor_ >= samples_.size()) return std::nullopt;
  return samples_[cursor_].t;
}

NetworkCounters ReplayNetworkProvider::do_poll(Millis t) {
  if (samples_.empty() || t < samples_.front().t) return {t, 0, 0};
  while (cursor_ < samples_.size() && samples_[cursor_].t <= t) ++cursor_;
  return samples_[cursor_ - 1];
}

namespace {

[[noreturn]] void replay_error(std::size_t line_no, const std::string& what) {
  throw Error(ErrorKind::validation, "replay line " + std::to_string(line_no) + ": " + what,
              "line " + std::to_string(line_no));
}

template <typename T>
T parse_number(std::string_view token, std::size_t line_no, const char* what) {
  T value{};
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    replay_error(line_no, std::string("bad ") + what + " '" + std::string(token) + "'");
  }
  return value;
}

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

ReplayTrace parse_replay(std::string_view content) {
  ReplayTrace out;
  std::int64_t last_t = std::numeric_limits<std::int64_t>::min();
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto tokens = split_tokens(line);
    if (tokens.empty() || tokens[0].front() == '#') {
      if (nl == content.size()) break;
      continue;
    }
    if (tokens.size() < 2) replay_error(line_no, "missing timestamp");
    const auto t = parse_number<std::int64_t>(tokens[1], line_no, "timestamp");
    if (t < 0) replay_error(line_no, "negative timestamp");
    if (t < last_t) replay_error(line_no, "timestamps not sorted");
    last_t = t;
    if (tokens[0] == "P") {
      if (tokens.size() < 3) replay_error(line_no, "power line without channels");
      PowerSample s{Millis{t}, {}};
      for (std::size_t i = 2; i < tokens.size(); ++i) {
        const auto eq = tokens[i].find('=');
        if (eq == std::string_view::npos || eq == 0) {
          replay_error(line_no, "expected <channel>=<watts>, got '" + std::string(tokens[i]) + "'");
        }
        const auto watts = parse_number<double>(tokens[i].substr(eq + 1), line_no, "watts");
        if (!std::isfinite(watts) || watts < 0.0) replay_error(line_no, "watts must be >= 0");
        if (!s.channels.emplace(std::string(tokens[i].substr(0, eq)), watts).second) {
          replay_error(line_no, "duplicate channel");
        }
      }
      if (!out.power.empty() && out.power.back().t >= s.t) {
        replay_error(line_no, "power timestamps must strictly increase");
      }
      out.power.push_back(std::move(s));
    } else if (tokens[0] == "N") {
      if (tokens.size() != 4) replay_error(line_no, "expected N <t_ms> <bytes_in> <bytes_out>");
      NetworkCounters c{Millis{t}, parse_number<std::uint64_t>(tokens[2], line_no, "bytes_in"),
                        parse_number<std::uint64_t>(tokens[3], line_no, "bytes_out")};
      if (!out.network.empty()) {
        const auto& prev = out.network.back();
        if (prev.t >= c.t) replay_error(line_no, "network timestamps must strictly increase");
        if (c.bytes_in < prev.bytes_in || c.bytes_out < prev.bytes_out) {
          replay_error(line_no, "network counters decrease");
        }
      }
      out.network.push_back(c);
    } else {
      replay_error(line_no, "unknown record type '" + std::string(tokens[0]) + "'");
    }
    if (nl == content.size()) break;
  }
  return out;
}

ReplayTrace load_replay(const std::filesystem::path& path) {
  return parse_replay(read_text_file(path));
}

std::string format_replay(const ResourceTrace& trace) {
  std::string out;
  std::size_t p = 0;
  std::size_t n = 0;
  // Merge by timestamp; power first on ties.
  while (p < trace.power.size() || n < trace.network.size()) {
    const bool take_power =
        n >= trace.network.size() ||
        (p < trace.power.size() && trace.power[p].t <= trace.network[n].t);
    if (take_power) {
      const auto& s = trace.power[p++];
      out += "P " + std::to_string(s.t.count());
      for (const auto& [channel, watts] : s.channels) {
        out += ' ';
        out += channel;
        out += '=';
        out += format_double(watts);
      }
    } else {
      const auto& c = trace.network[n++];
      out += "N " + std::to_string(c.t.count()) + ' ' + std::to_string(c.bytes_in) + ' ' +
             std::to_string(c.bytes_out);
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------- driver

void DriverNetworkProvider::report(std::uint64_t bytes_in, std::uint64_t bytes_out) {
  std::lock_guard lock(mutex_);
  in_ = bytes_in;
  out_ = bytes_out;
  reported_ = true;
}

bool DriverNetworkProvider::any_reported() const {
  std::lock_guard lock(mutex_);
  return reported_;
}

NetworkCounters DriverNetworkProvider::latest() const {
  std::lock_guard lock(mutex_);
  return {Millis{0}, in_, out_};
}

NetworkCounters DriverNetworkProvider::do_poll(Millis t) {
  std::lock_guard lock(mutex_);
  return {t, in_, out_};
}

// ---------------------------------------------------------------- platform

namespace {

std::optional<double> read_number_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  double v = 0.0;
  if (!(in >> v)) return std::nullopt;
  return v;
}

std::string read_line_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string s;
  std::getline(in, s);
  return s;
}

}  // namespace

RaplPowerProvider::RaplPowerProvider(std::filesystem::path root) {
  std::error_code ec;
  std::vector<std::string> tried;
  if (std::filesystem::is_directory(root, ec)) {
    for (const auto& entry : std::filesystem::directory_iterator(root, ec)) {
      const auto dir = entry.path();
      if (dir.filename().string().rfind("intel-rapl:", 0) != 0) continue;
      const std::string name = read_line_file(dir / "name");
      std::string channel;
      if (name.rfind("package", 0) == 0) channel = std::string(kChannelCpu);
      else if (name == "dram") channel = std::string(kChannelMemory);
      else if (name == "psys") channel = std::string(kChannelMachine);
      else continue;
      const auto energy = read_number_file(dir / "energy_uj");
      if (!energy) {
        tried.push_back(channel);
        continue;
      }
      zones_.push_back({channel, dir / "energy_uj",
                        read_number_file(dir / "max_energy_range_uj").value_or(0.0), *energy});
    }
  }
  if (zones_.empty()) {
    if (tried.empty()) tried = {std::string(kChannelCpu), std::string(kChannelMemory),
                                std::string(kChannelMachine)};
    throw ProviderError("no readable powercap zone under " + root.string(), tried);
  }
  last_read_ = std::chrono::steady_clock::now();
}

std::vector<std::string> RaplPowerProvider::channels() const {
  std::set<std::string> out;
  for (const auto& z : zones_) out.insert(z.channel);
  return {out.begin(), out.end()};
}

PowerSample RaplPowerProvider::do_poll(Millis t) {
  const auto now = std::chrono::steady_clock::now();
  const double dt = std::chrono::duration<double>(now - last_read_).count();
  last_read_ = now;
  PowerSample sample{t, {}};
  std::vector<std::string> failed;
  for (auto& z : zones_) {
    const auto energy = read_number_file(z.energy_file);
    if (!energy) {
      failed.push_back(z.channel);
      continue;
    }
    double delta = *energy - z.last_uj;
    if (delta < 0.0 && z.max_range_uj > 0.0) delta += z.max_range_uj;
    z.last_uj = *energy;
    const double watts = dt > 0.0 ? std::max(0.0, delta) * 1e-6 / dt : 0.0;
    sample.channels[z.channel] += watts;
  }
  if (sample.channels.empty()) throw ProviderError("all powercap zones failed", failed);
  return sample;
}

PlatformNetworkProvider::PlatformNetworkProvider(std::filesystem::path dev_file)
    : dev_file_(std::move(dev_file)) {
  std::tie(base_in_, base_out_) = read_totals();
}

std::pair<std::uint64_t, std::uint64_t> PlatformNetworkProvider::read_totals() const {
  std::ifstream in(dev_file_);
  if (!in) throw ProviderError("cannot read " + dev_file_.string(), {"network"});
  std::string line;
  std::uint64_t total_in = 0;
  std::uint64_t total_out = 0;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string iface = line.substr(0, colon);
    iface.erase(0, iface.find_first_not_of(' '));
    if (iface == "lo") continue;
    std::istringstream fields(line.substr(colon + 1));
    std::uint64_t v[9]{};
    for (auto& x : v) fields >> x;
    if (!fields) continue;
    total_in += v[0];   // rx bytes
    total_out += v[8];  // tx bytes
  }
  return {total_in, total_out};
}

NetworkCounters PlatformNetworkProvider::do_poll(Millis t) {
  auto [in, out] = read_totals();
  return {t, in >= base_in_ ? in - base_in_ : 0, out >= base_out_ ? out - base_out_ : 0};
}

// ---------------------------------------------------------------- specs

std::string_view to_string(ProviderKind kind) noexcept {
  switch (kind) {
    case ProviderKind::sensor: return "sensor";
    case ProviderKind::synthetic: return "synthetic";
    case ProviderKind::replay: return "replay";
  }
  return "unknown";
}

namespace {

double number_or(const nlohmann::json& raw, const char* key, double fallback) {
  auto it = raw.find(key);
  if (it == raw.end()) return fallback;
  if (!it->is_number()) {
    throw Error(ErrorKind::validation, std::string("field '") + key + "' must be a number", key);
  }
  return it->get<double>();
}

WaveShape parse_shape(const std::string& s) {
  if (s == "constant") return WaveShape::constant;
  if (s == "ramp") return WaveShape::ramp;
  if (s == "step") return WaveShape::step;
  throw Error(ErrorKind::validation, "unknown waveform shape '" + s + "'", "shape");
}

std::string_view shape_name(WaveShape s) {
  switch (s) {
    case WaveShape::constant: return "constant";
    case WaveShape::ramp: return "ramp";
    case WaveShape::step: return "step";
  }
  return "constant";
}

}  // namespace

ProviderSpec parse_provider_spec(const nlohmann::json& raw, std::string_view role) {
  if (!raw.is_object() || !raw.contains("kind") || !raw["kind"].is_string()) {
    throw Error(ErrorKind::validation,
                std::string(role) + " provider needs a string 'kind'", std::string(role));
  }
  ProviderSpec spec;
  const auto kind = raw["kind"].get<std::string>();
  if (kind == "sensor") {
    spec.kind = ProviderKind::sensor;
  } else if (kind == "replay") {
    spec.kind = ProviderKind::replay;
    if (!raw.contains("path") || !raw["path"].is_string() ||
        raw["path"].get<std::string>().empty()) {
      throw Error(ErrorKind::validation, std::string(role) + " replay provider needs 'path'",
                  "path");
    }
    spec.replay_path = raw["path"].get<std::string>();
  } else if (kind == "synthetic") {
    spec.kind = ProviderKind::synthetic;
    if (role == "power") {
      if (!raw.contains("channels") || !raw["channels"].is_object() || raw["channels"].empty()) {
        throw Error(ErrorKind::validation, "synthetic power provider needs 'channels'",
                    "channels");
      }
      for (const auto& [channel, w] : raw["channels"].items()) {
        if (!w.is_object()) {
          throw Error(ErrorKind::validation, "waveform for " + channel + " must be an object",
                      channel);
        }
        WaveformSpec ws;
        ws.shape = parse_shape(w.value("shape", std::string("constant")));
        if (!w.contains("amplitude_start_w")) {
          throw Error(ErrorKind::validation,
                      "waveform for " + channel + " needs 'amplitude_start_w'",
                      "amplitude_start_w");
        }
        ws.amplitude_start_w = number_or(w, "amplitude_start_w", 0.0);
        ws.amplitude_end_w = number_or(w, "amplitude_end_w", ws.amplitude_start_w);
        ws.period_s = number_or(w, "period_s", 1.0);
        ws.noise_w = number_or(w, "noise_w", 0.0);
        validate_waveform(ws, channel);
        spec.waveforms.emplace(channel, ws);
      }
    } else {
      spec.bytes_in_per_s = number_or(raw, "bytes_in_per_s", 0.0);
      spec.bytes_out_per_s = number_or(raw, "bytes_out_per_s", 0.0);
      if (!(spec.bytes_in_per_s >= 0.0) || !(spec.bytes_out_per_s >= 0.0)) {
        throw Error(ErrorKind::validation, "synthetic network rates must be >= 0",
                    "bytes_in_per_s");
      }
    }
  } else {
    throw Error(ErrorKind::validation, "unknown provider kind '" + kind + "'", "kind");
  }
  return spec;
}

nlohmann::json to_json(const ProviderSpec& spec, std::string_view role) {
  nlohmann::json j{{"kind", to_string(spec.kind)}};
  if (spec.kind == ProviderKind::replay) j["path"] = spec.replay_path.generic_string();
  if (spec.kind == ProviderKind::synthetic) {
    if (role == "power") {
      nlohmann::json channels = nlohmann::json::object();
      for (const auto& [c, w] : spec.waveforms) {
        channels[c] = {{"shape", shape_name(w.shape)},
                       {"amplitude_start_w", w.amplitude_start_w},
                       {"amplitude_end_w", w.amplitude_end_w},
                       {"period_s", w.period_s},
                       {"noise_w", w.noise_w}};
      }
      j["channels"] = channels;
    } else {
      j["bytes_in_per_s"] = spec.bytes_in_per_s;
      j["bytes_out_per_s"] = spec.bytes_out_per_s;
    }
  }
  return j;
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

std::unique_ptr<PowerProvider> make_power_provider(const ProviderSpec& spec, std::uint64_t seed,
                                                   const std::filesystem::path& base_dir) {
  switch (spec.kind) {
    case ProviderKind::synthetic:
      return std::make_unique<SyntheticPowerProvider>(spec.waveforms, seed);
    case ProviderKind::replay:
      return std::make_unique<ReplayPowerProvider>(
          load_replay(resolve(spec.replay_path, base_dir)).power);
    case ProviderKind::sensor:
      return std::make_unique<RaplPowerProvider>();
  }
  throw Error(ErrorKind::validation, "unknown power provider");
}

std::unique_ptr<NetworkProvider> make_network_provider(const ProviderSpec& spec,
                                                       const std::filesystem::path& base_dir) {
  switch (spec.kind) {
    case ProviderKind::synthetic:
      return std::make_unique<SyntheticNetworkProvider>(spec.bytes_in_per_s,
                                                        spec.bytes_out_per_s);
    case ProviderKind::replay:
      return std::make_unique<ReplayNetworkProvider>(
          load_replay(resolve(spec.replay_path, base_dir)).network);
    case ProviderKind::sensor:
      return std::make_unique<PlatformNetworkProvider>();
  }
  throw Error(ErrorKind::validation, "unknown network provider");
}

// ---------------------------------------------------------------- sampler

namespace {

/// Next poll time for one provider: its own schedule, or the grid.
struct Cursor {
  bool scheduled;
  std::int64_t grid_index = 0;

  template <typename Provider>
  std::optional<Millis> next(const Provider& p, Millis interval) const {
    if (scheduled) return p.next_scheduled();
    return interval * grid_index;
  }
};

}  // namespace

ResourceTrace sample_run(PowerProvider& power, NetworkProvider& network, Millis interval,
                         const StopSignal& stop, Clock& clock, std::optional<Millis> origin) {
  if (interval < kMinSamplingInterval) {
    throw Error(ErrorKind::validation,
                "sampling interval must be >= " + std::to_string(kMinSamplingInterval.count()) +
                    " ms",
                "sampling_interval_ms");
  }
  const Millis base = origin.value_or(clock.now());
  Cursor pc{power.scheduled()};
  Cursor nc{network.scheduled()};
  const bool any_scheduled = pc.scheduled || nc.scheduled;

  ResourceTrace trace;
  for (;;) {
    const auto tp = pc.next(power, interval);
    const auto tn = nc.next(network, interval);
    if (any_scheduled && (!pc.scheduled || !tp) && (!nc.scheduled || !tn)) break;
    if (!tp && !tn) break;
    Millis t = tp && tn ? std::min(*tp, *tn) : (tp ? *tp : *tn);

    auto past_stop = [&] {
      if (!stop.stop_requested()) return false;
      const auto at = stop.stop_time();
      return !at || t > *at;
    };
    if (past_stop()) break;
    clock.wait_until(base + t, stop);
    if (past_stop()) break;

    if (tp && *tp == t) {
      trace.power.push_back(power.poll(t));
      ++pc.grid_index;
    }
    if (tn && *tn == t) {
      trace.network.push_back(network.poll(t));
      ++nc.grid_index;
    }
  }

  // The stop time may arrive after the sampler has already polled past it.
  if (const auto at = stop.stop_time()) {
    std::erase_if(trace.power, [&](const PowerSample& s) { return s.t > *at; });
    std::erase_if(trace.network, [&](const NetworkCounters& s) { return s.t > *at; });
  }
  if (trace.power.size() < 2) {
    throw Error(ErrorKind::trace_too_short,
                "sampling stopped after " + std::to_string(trace.power.size()) +
                    " power sample(s); need >= 2");
  }
  Millis first = trace.power.front().t;
  Millis last = trace.power.back().t;
  if (!trace.network.empty()) {
    first = std::min(first, trace.network.front().t);
    last = std::max(last, trace.network.back().t);
  }
  trace.start_t = std::min(first, Millis{0});
  const auto at = stop.stop_time();
  trace.end_t = at ? std::max(*at, last) : last;
  validate_trace(trace);
  return trace;
}

}  // namespace ecotrace
