#pragma once

// Scratch directories and scenario documents for tests that launch the
// mock driver.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

namespace fixture {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("ecotrace-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write(const fs::path& p, const std::string& content) {
  std::ofstream(p, std::ios::binary | std::ios::trunc) << content;
}

inline std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string quote(const fs::path& p) { return "\"" + p.string() + "\""; }

/// Mock driver command line reading `scenario.json` from the run directory.
inline std::string driver(const std::string& extra = "") {
  std::string cmd = quote(ECOTRACE_MOCK_DRIVER) + " --scenario scenario.json";
  if (!extra.empty()) cmd += " " + extra;
  return cmd;
}

inline nlohmann::json constant_power(double watts) {
  return {{"kind", "synthetic"},
          {"channels", {{"machine", {{"shape", "constant"}, {"amplitude_start_w", watts}}}}}};
}

inline nlohmann::json unit(const std::string& name, double seconds,
                           std::vector<std::string> steps = {}) {
  nlohmann::json u{{"name", name}, {"target_duration_s", seconds}};
  if (!steps.empty()) u["steps"] = steps;
  return u;
}

inline nlohmann::json composite(const std::string& name, std::vector<std::string> members) {
  return {{"name", name}, {"composite_of", members}};
}

/// Two configurations, ad blocker on and off.
inline nlohmann::json scenario(nlohmann::json units, const std::string& driver_cmd,
                               int n_runs = 1, nlohmann::json power = constant_power(10.0)) {
  return {{"services", {"mail"}},
          {"configurations",
           {{{"label", "adblock-on"}, {"ad_blocker", true}},
            {{"label", "adblock-off"}, {"ad_blocker", false}}}},
          {"units", std::move(units)},
          {"n_runs", n_runs},
          {"sampling_interval_ms", 10},
          {"cooldown_ms", 20},
          {"seed", 1234},
          {"driver_command", driver_cmd},
          {"power", std::move(power)}};
}

inline nlohmann::json mail_units(double scale) {
  return nlohmann::json::array({unit("Idle", 0.3 * scale, {"wait"}),
                                unit("Login", 0.3 * scale, {"open", "type creds", "submit"}),
                                unit("Logout", 0.1 * scale, {"menu", "sign out"}),
                                unit("No attachment", 0.2 * scale, {"compose", "send"}),
                                unit("Attachment", 0.25 * scale, {"compose", "attach", "send"}),
                                unit("Reply", 0.2 * scale, {"open", "reply", "send"}),
                                unit("Delete", 0.1 * scale, {"select", "delete"}),
                                composite("session", {"Login", "Reply", "Logout"})});
}

inline nlohmann::json factors(double intensity = 0.5) {
  return {{"grid_intensity_kgco2e_per_kwh", intensity},
          {"network_use_kgco2e_per_gb", 0.1},
          {"server_use_kgco2e_per_gb", 0.05},
          {"network_embodied_kgco2e_per_gb", 0.02},
          {"server_embodied_kgco2e_per_gb", 0.01},
          {"source_label", "fixture"}};
}

inline nlohmann::json machine() {
  return {{"embodied_total_kgco2e", 300.0}, {"lifetime_s", 126144000.0}, {"usage_share", 1.0}};
}

}  // namespace fixture
