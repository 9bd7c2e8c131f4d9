#include "ecotrace/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ecotrace/error.hpp"

namespace ecotrace {

namespace {

void require_quantity(double value, std::string_view what) {
  if (!std::isfinite(value) || value < 0.0) {
    throw Error(ErrorKind::invalid_quantity,
                std::string(what) + " must be finite and >= 0, got " + std::to_string(value),
                std::string(what));
  }
}

double require_number(const nlohmann::json& raw, const char* key) {
  auto it = raw.find(key);
  if (it == raw.end()) {
    throw Error(ErrorKind::validation, std::string("missing field '") + key + "'", key);
  }
  if (!it->is_number()) {
    throw Error(ErrorKind::validation, std::string("field '") + key + "' must be a number", key);
  }
  const double value = it->get<double>();
  if (!std::isfinite(value) || value < 0.0) {
    throw Error(ErrorKind::validation,
                std::string("field '") + key + "' must be finite and >= 0", key);
  }
  return value;
}

}  // namespace

std::string_view to_string(NetworkSource source) noexcept {
  switch (source) {
    case NetworkSource::driver: return "driver";
    case NetworkSource::replay: return "replay";
    case NetworkSource::sensor: return "sensor";
    case NetworkSource::synthetic: return "synthetic";
  }
  return "unknown";
}

void validate_trace(const ResourceTrace& trace) {
  if (trace.power.size() < 2) {
    throw Error(ErrorKind::trace_too_short,
                "trace has " + std::to_string(trace.power.size()) + " power samples, need >= 2");
  }
  for (std::size_t i = 0; i < trace.power.size(); ++i) {
    const auto& s = trace.power[i];
    if (s.t.count() < 0) {
      throw Error(ErrorKind::validation, "power sample " + std::to_string(i) + " has negative t");
    }
    if (i > 0 && s.t <= trace.power[i - 1].t) {
      throw Error(ErrorKind::monotonicity,
                  "power sample " + std::to_string(i) + " is not strictly after its predecessor");
    }
    for (const auto& [channel, watts] : s.channels) {
      if (!std::isfinite(watts) || watts < 0.0) {
        throw Error(ErrorKind::validation,
                    "power sample " + std::to_string(i) + " channel " + channel +
                        " must be finite and >= 0",
                    channel);
      }
    }
  }
  for (std::size_t i = 1; i < trace.network.size(); ++i) {
    const auto& prev = trace.network[i - 1];
    const auto& cur = trace.network[i];
    if (cur.t <= prev.t) {
      throw Error(ErrorKind::monotonicity,
                  "network sample " + std::to_string(i) + " is not strictly after its predecessor");
    }
    if (cur.bytes_in < prev.bytes_in || cur.bytes_out < prev.bytes_out) {
      throw Error(ErrorKind::monotonicity,
                  "network counters decrease at sample " + std::to_string(i));
    }
  }
  const auto first_t = trace.power.front().t;
  const auto last_t = trace.power.back().t;
  if (trace.start_t > first_t || last_t > trace.end_t) {
    throw Error(ErrorKind::validation, "power samples fall outside [start_t, end_t]");
  }
  if (!trace.network.empty() &&
      (trace.start_t > trace.network.front().t || trace.network.back().t > trace.end_t)) {
    throw Error(ErrorKind::validation, "network samples fall outside [start_t, end_t]");
  }
}

bool CampaignRecord::complete() const {
  if (!failures.empty()) return false;
  for (const auto& [unit, records] : runs) {
    if (static_cast<int>(records.size()) != n_runs_per_unit) return false;
  }
  return true;
}

double joules_to_kwh(double joules) {
  require_quantity(joules, "energy_j");
  return joules / kJoulesPerKwh;
}

double kwh_to_joules(double kwh) {
  require_quantity(kwh, "energy_kwh");
  return kwh * kJoulesPerKwh;
}

double bytes_to_gb(double bytes) {
  require_quantity(bytes, "bytes");
  return bytes / kBytesPerGb;
}

double gb_to_bytes(double gb) {
  require_quantity(gb, "gb");
  return gb * kBytesPerGb;
}

EmissionFactors validate_factors(const nlohmann::json& raw) {
  if (!raw.is_object()) {
    throw Error(ErrorKind::validation, "factor file must be a JSON object");
  }
  EmissionFactors f;
  f.grid_intensity = require_number(raw, "grid_intensity_kgco2e_per_kwh");
  f.network_use_per_gb = require_number(raw, "network_use_kgco2e_per_gb");
  f.server_use_per_gb = require_number(raw, "server_use_kgco2e_per_gb");
  f.network_embodied_per_gb = require_number(raw, "network_embodied_kgco2e_per_gb");
  f.server_embodied_per_gb = require_number(raw, "server_embodied_kgco2e_per_gb");
  auto it = raw.find("source_label");
  if (it == raw.end()) {
    throw Error(ErrorKind::validation, "missing field 'source_label'", "source_label");
  }
  if (!it->is_string() || it->get<std::string>().empty()) {
    throw Error(ErrorKind::validation, "field 'source_label' must be a non-empty string",
                "source_label");
  }
  f.source_label = it->get<std::string>();
  return f;
}

EmissionFactors load_factors(const std::filesystem::path& path) {
  return validate_factors(read_json_file(path));
}

nlohmann::json to_json(const EmissionFactors& f) {
  return {
      {"grid_intensity_kgco2e_per_kwh", f.grid_intensity},
      {"network_use_kgco2e_per_gb", f.network_use_per_gb},
      {"server_use_kgco2e_per_gb", f.server_use_per_gb},
      {"network_embodied_kgco2e_per_gb", f.network_embodied_per_gb},
      {"server_embodied_kgco2e_per_gb", f.server_embodied_per_gb},
      {"source_label", f.source_label},
  };
}

MachineProfile validate_machine(const nlohmann::json& raw) {
  if (!raw.is_object()) {
    throw Error(ErrorKind::validation, "machine file must be a JSON object");
  }
  MachineProfile m;
  m.embodied_total_kgco2e = require_number(raw, "embodied_total_kgco2e");
  m.lifetime_s = require_number(raw, "lifetime_s");
  m.usage_share = require_number(raw, "usage_share");
  if (m.lifetime_s <= 0.0) {
    throw Error(ErrorKind::validation, "field 'lifetime_s' must be > 0", "lifetime_s");
  }
  if (m.usage_share > 1.0) {
    throw Error(ErrorKind::validation, "field 'usage_share' must be in [0, 1]", "usage_share");
  }
  return m;
}

MachineProfile load_machine(const std::filesystem::path& path) {
  return validate_machine(read_json_file(path));
}

nlohmann::json to_json(const MachineProfile& m) {
  return {
      {"embodied_total_kgco2e", m.embodied_total_kgco2e},
      {"lifetime_s", m.lifetime_s},
      {"usage_share", m.usage_share},
  };
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::io, "cannot open '" + path.string() + "'", path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) {
    throw Error(ErrorKind::io, "failed reading '" + path.string() + "'", path.string());
  }
  return buf.str();
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::validation, "'" + path.string() + "' is not valid JSON: " + e.what(),
                path.string());
  }
}

}  // namespace ecotrace
