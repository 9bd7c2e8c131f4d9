#pragma once

// Direct re-computation of the emission operations for randomized inputs.
// Returns a description of the first mismatch, or an empty string.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "ecotrace/emissions.hpp"

namespace emission_oracle {

inline bool rel_eq(double a, double b, double tol = 1e-12) {
  if (a == b) return true;
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

inline ecotrace::EmissionFactors random_factors(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(0.0, 2.0);
  std::uniform_int_distribution<int> zero(0, 5);
  auto pick = [&] { return zero(rng) == 0 ? 0.0 : f(rng); };
  return {pick(), pick(), pick(), pick(), pick(), "random"};
}

inline ecotrace::UnitStats random_stats(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> j(0.0, 1e4);
  std::uniform_real_distribution<double> b(0.0, 1e10);
  std::uniform_real_distribution<double> d(0.0, 600.0);
  ecotrace::UnitStats s;
  s.unit = "u";
  s.energy_j["machine"] = {j(rng), j(rng) / 10.0, 5};
  s.bytes = {std::floor(b(rng)), b(rng) / 10.0, 5};
  s.duration_s = {d(rng), d(rng) / 10.0, 5};
  return s;
}

inline std::string check_case(std::mt19937_64& rng) {
  using namespace ecotrace;
  const auto f = random_factors(rng);
  const auto s = random_stats(rng);
  std::uniform_real_distribution<double> share(0.0, 1.0);
  const MachineProfile m{std::uniform_real_distribution<double>(0.0, 1000.0)(rng),
                         std::uniform_real_distribution<double>(1.0, 3e8)(rng), share(rng)};

  const double kwh = s.energy_j.at("machine").mean / 3.6e6;
  const double gb = s.bytes.mean / 1e9;
  const double use = kwh * f.grid_intensity;
  const double net = gb * f.network_use_per_gb;
  const double srv = gb * f.server_use_per_gb;
  const double net_emb = gb * f.network_embodied_per_gb;
  const double srv_emb = gb * f.server_embodied_per_gb;
  const double user_emb = m.embodied_total_kgco2e * m.usage_share * s.duration_s.mean / m.lifetime_s;

  if (!rel_eq(use_phase_emissions(kwh, f), use)) return "use_phase";
  const auto ns = network_server_emissions(s.bytes.mean, f);
  if (!rel_eq(ns.network_use, net) || !rel_eq(ns.server_use, srv)) return "network_server";
  const auto ee = embodied_eol_emissions(s.bytes.mean, f);
  if (!rel_eq(ee.network_embodied_eol, net_emb) || !rel_eq(ee.server_embodied_eol, srv_emb))
    return "embodied_eol";
  if (!rel_eq(user_embodied_share(m, s.duration_s.mean), user_emb)) return "user_embodied";

  const auto t = total_footprint(s, f, m);
  if (!rel_eq(t.user_use, use) || !rel_eq(t.network_use, net) || !rel_eq(t.server_use, srv) ||
      !rel_eq(t.network_embodied_eol, net_emb) || !rel_eq(t.server_embodied_eol, srv_emb) ||
      !rel_eq(t.user_embodied, user_emb))
    return "total_footprint components";
  if (!rel_eq(t.total, use + net + srv + net_emb + srv_emb + user_emb)) return "total additivity";

  // Zero-factor isolation: keeping one factor leaves exactly one component.
  EmissionFactors only_grid{f.grid_intensity, 0, 0, 0, 0, "x"};
  const MachineProfile no_machine{0.0, 1.0, 0.0};
  const auto iso = total_footprint(s, only_grid, no_machine);
  if (!rel_eq(iso.total, use) || iso.network_use != 0.0 || iso.server_use != 0.0 ||
      iso.network_embodied_eol != 0.0 || iso.server_embodied_eol != 0.0 || iso.user_embodied != 0.0)
    return "zero-factor isolation";
  EmissionFactors only_net{0, f.network_use_per_gb, 0, 0, 0, "x"};
  if (!rel_eq(total_footprint(s, only_net, no_machine).total, net)) return "network isolation";

  // Additivity over traffic: footprint of bytes a + b equals the sum of the
  // traffic components for a and b.
  auto s2 = s;
  s2.bytes.mean = std::floor(std::uniform_real_distribution<double>(0.0, 1e10)(rng));
  auto s12 = s;
  s12.bytes.mean = s.bytes.mean + s2.bytes.mean;
  const auto a = total_footprint(s, f, m);
  const auto b = total_footprint(s2, f, m);
  const auto ab = total_footprint(s12, f, m);
  if (!rel_eq(ab.network_use, a.network_use + b.network_use) ||
      !rel_eq(ab.server_embodied_eol, a.server_embodied_eol + b.server_embodied_eol))
    return "traffic additivity";
  return {};
}

}  // namespace emission_oracle
