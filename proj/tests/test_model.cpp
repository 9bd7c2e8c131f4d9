#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "ecotrace/error.hpp"
#include "ecotrace/model.hpp"

using namespace ecotrace;
using nlohmann::json;

namespace {

json good_factors() {
  return json{{"grid_intensity_kgco2e_per_kwh", 0.5},
              {"network_use_kgco2e_per_gb", 0.1},
              {"server_use_kgco2e_per_gb", 0.05},
              {"network_embodied_kgco2e_per_gb", 0.02},
              {"server_embodied_kgco2e_per_gb", 0.01},
              {"source_label", "test grid"}};
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::io;
}

std::string subject_of(const json& raw) {
  try {
    validate_factors(raw);
  } catch (const Error& e) {
    return e.subject();
  }
  return {};
}

}  // namespace

TEST_CASE("joules_to_kwh examples") {
  CHECK(joules_to_kwh(3.6e6) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(joules_to_kwh(0.0) == 0.0);
  CHECK(joules_to_kwh(1.8e5) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(kind_of([] { joules_to_kwh(-1.0); }) == ErrorKind::invalid_quantity);
  CHECK(kind_of([] { joules_to_kwh(std::nan("")); }) == ErrorKind::invalid_quantity);
  CHECK(kind_of([] { joules_to_kwh(std::numeric_limits<double>::infinity()); }) ==
        ErrorKind::invalid_quantity);
}

TEST_CASE("bytes_to_gb examples") {
  CHECK(bytes_to_gb(1e9) == 1.0);
  CHECK(bytes_to_gb(0.0) == 0.0);
  CHECK(bytes_to_gb(2.5e9) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(kind_of([] { bytes_to_gb(-5.0); }) == ErrorKind::invalid_quantity);
  CHECK(kind_of([] { gb_to_bytes(-5.0); }) == ErrorKind::invalid_quantity);
}

TEST_CASE("conversions round-trip and are linear") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> gb(0.0, 1e6);
  std::uniform_real_distribution<double> j(0.0, 1e9);
  for (int i = 0; i < 2000; ++i) {
    const double x = gb(rng);
    CHECK(std::abs(bytes_to_gb(gb_to_bytes(x)) - x) <= 1e-12 * std::max(1.0, x));
    const double a = j(rng);
    const double b = j(rng);
    const double sum = joules_to_kwh(a + b);
    CHECK(std::abs(sum - (joules_to_kwh(a) + joules_to_kwh(b))) <= 1e-12 * std::max(1.0, sum));
    CHECK(kwh_to_joules(joules_to_kwh(a)) == doctest::Approx(a).epsilon(1e-12));
  }
}

TEST_CASE("validate_factors accepts a complete document") {
  const auto f = validate_factors(good_factors());
  CHECK(f.grid_intensity == 0.5);
  CHECK(f.network_use_per_gb == 0.1);
  CHECK(f.server_use_per_gb == 0.05);
  CHECK(f.network_embodied_per_gb == 0.02);
  CHECK(f.server_embodied_per_gb == 0.01);
  CHECK(f.source_label == "test grid");
  CHECK(validate_factors(to_json(f)) == f);
}

TEST_CASE("validate_factors names the offending field") {
  auto neg = good_factors();
  neg["grid_intensity_kgco2e_per_kwh"] = -0.1;
  CHECK(kind_of([&] { validate_factors(neg); }) == ErrorKind::validation);
  CHECK(subject_of(neg) == "grid_intensity_kgco2e_per_kwh");

  auto missing = good_factors();
  missing.erase("server_use_kgco2e_per_gb");
  CHECK(subject_of(missing) == "server_use_kgco2e_per_gb");

  auto label = good_factors();
  label["source_label"] = "";
  CHECK(subject_of(label) == "source_label");

  auto text = good_factors();
  text["network_use_kgco2e_per_gb"] = "0.1";
  CHECK(subject_of(text) == "network_use_kgco2e_per_gb");

  CHECK(kind_of([] { validate_factors(json::array()); }) == ErrorKind::validation);
}

TEST_CASE("validate_factors accepts exactly the valid documents") {
  const char* numeric[] = {"grid_intensity_kgco2e_per_kwh", "network_use_kgco2e_per_gb",
                           "server_use_kgco2e_per_gb", "network_embodied_kgco2e_per_gb",
                           "server_embodied_kgco2e_per_gb"};
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pick(0, 9);
  std::uniform_real_distribution<double> val(-1.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    json doc = json::object();
    bool valid = true;
    for (const char* key : numeric) {
      const int r = pick(rng);
      if (r == 0) {
        valid = false;  // omitted
      } else if (r == 1) {
        doc[key] = "x";
        valid = false;
      } else {
        const double v = val(rng);
        doc[key] = v;
        valid = valid && v >= 0.0;
      }
    }
    if (pick(rng) == 0) {
      doc["source_label"] = "";
      valid = false;
    } else {
      doc["source_label"] = "s";
    }
    bool accepted = true;
    try {
      validate_factors(doc);
    } catch (const Error& e) {
      accepted = false;
      CHECK(e.kind() == ErrorKind::validation);
    }
    CHECK(accepted == valid);
  }
}

TEST_CASE("validate_machine") {
  const json ok{{"embodied_total_kgco2e", 300.0}, {"lifetime_s", 126144000.0}, {"usage_share", 1.0}};
  const auto m = validate_machine(ok);
  CHECK(m.embodied_total_kgco2e == 300.0);
  CHECK(validate_machine(to_json(m)) == m);

  auto zero_life = ok;
  zero_life["lifetime_s"] = 0.0;
  CHECK(kind_of([&] { validate_machine(zero_life); }) == ErrorKind::validation);
  auto share = ok;
  share["usage_share"] = 1.5;
  CHECK(kind_of([&] { validate_machine(share); }) == ErrorKind::validation);
  auto neg = ok;
  neg["embodied_total_kgco2e"] = -1.0;
  CHECK(kind_of([&] { validate_machine(neg); }) == ErrorKind::validation);
}

TEST_CASE("validate_trace invariants") {
  ResourceTrace t;
  t.power = {{Millis{0}, {{"machine", 1.0}}}, {Millis{10}, {{"machine", 2.0}}}};
  t.end_t = Millis{10};
  CHECK_NOTHROW(validate_trace(t));

  auto dup = t;
  dup.power[1].t = Millis{0};
  CHECK_THROWS_AS(validate_trace(dup), Error);

  auto short_trace = t;
  short_trace.power.pop_back();
  CHECK(kind_of([&] { validate_trace(short_trace); }) == ErrorKind::trace_too_short);

  auto neg = t;
  neg.power[0].channels["machine"] = -1.0;
  CHECK_THROWS_AS(validate_trace(neg), Error);

  auto net = t;
  net.network = {{Millis{0}, 10, 10}, {Millis{10}, 5, 10}};
  CHECK(kind_of([&] { validate_trace(net); }) == ErrorKind::monotonicity);
}

TEST_CASE("file helpers report the path") {
  try {
    load_factors("/nonexistent/factors.json");
    FAIL("expected io error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
    CHECK(std::string(e.what()).find("/nonexistent/factors.json") != std::string::npos);
  }
  CHECK(exit_code_for(ErrorKind::io) == 3);
  CHECK(exit_code_for(ErrorKind::validation) == 1);
  CHECK(exit_code_for(ErrorKind::protocol) == 2);
}
