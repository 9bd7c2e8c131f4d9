#include "cli_runner.hpp"
#include "doctest.h"
#include "ecotrace/report.hpp"

using nlohmann::json;

namespace {

json one_unit(const std::string& driver_extra = "") {
  return fixture::scenario(json::array({fixture::unit("Idle", 0.1), fixture::unit("Login", 0.3)}),
                           fixture::driver(driver_extra));
}

}  // namespace

TEST_CASE("run writes a report with the expected use-phase emissions") {
  fixture::TempDir dir;
  cli::stage(dir, one_unit(), 1.0);
  const auto r = cli::run(cli::run_args("adblock-on", "report.json") + " --csv report.csv --trace-dir traces", dir);
  REQUIRE(r.exit_code == 0);
  const auto doc = json::parse(fixture::read(dir / "report.json"));
  const double user_use = doc["units"]["Login"]["emissions_kgco2e"]["user_use"];
  CHECK(std::abs(user_use - 3.0 / 3.6e6) <= 1e-6 * 3.0 / 3.6e6);
  CHECK_FALSE(doc.contains("generated_at"));
  CHECK(fixture::read(dir / "report.csv").find("Login") != std::string::npos);
  const auto trace = fixture::read(dir / "traces/adblock-on/Login_run1.trace");
  CHECK(trace.rfind("P 0 machine=10", 0) == 0);
}

TEST_CASE("exit codes") {
  fixture::TempDir dir;
  cli::stage(dir, one_unit());

  SUBCASE("missing factor file is an I/O error naming the path") {
    const auto r = cli::run(
        "run --scenario scenario.json --factors nope.json --machine machine.json --config adblock-on --out r.json",
        dir);
    CHECK(r.exit_code == 3);
    CHECK(r.err.find("nope.json") != std::string::npos);
  }
  SUBCASE("duplicate unit is a validation error") {
    auto doc = one_unit();
    doc["units"].push_back(fixture::unit("Login", 1.0));
    fixture::write(dir / "scenario.json", doc.dump());
    CHECK(cli::run(cli::run_args("adblock-on", "r.json"), dir).exit_code == 1);
  }
  SUBCASE("unknown configuration") {
    CHECK(cli::run(cli::run_args("cookies", "r.json"), dir).exit_code == 1);
  }
  SUBCASE("bad factor value names the field") {
    auto f = fixture::factors();
    f["grid_intensity_kgco2e_per_kwh"] = -0.1;
    fixture::write(dir / "factors.json", f.dump());
    const auto r = cli::run(cli::run_args("adblock-on", "r.json"), dir);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("grid_intensity_kgco2e_per_kwh") != std::string::npos);
  }
  SUBCASE("driver error aborts the campaign") {
    fixture::write(dir / "scenario.json", one_unit("--fail-unit Login").dump());
    const auto r = cli::run(cli::run_args("adblock-on", "r.json"), dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("Login") != std::string::npos);
  }
  SUBCASE("keep going still writes a report") {
    fixture::write(dir / "scenario.json", one_unit("--fail-unit Login").dump());
    const auto r = cli::run(cli::run_args("adblock-on", "r.json") + " --keep-going", dir);
    CHECK(r.exit_code == 0);
    const auto doc = json::parse(fixture::read(dir / "r.json"));
    CHECK(doc["campaign"]["complete"] == false);
    CHECK(doc["campaign"]["failures"].size() == 1);
  }
  SUBCASE("negative extrapolation input") {
    CHECK(cli::run("extrapolate --per-kwh -1 --per-kgco2e 0 --daily-volume 10 --out -", dir).exit_code == 1);
  }
  SUBCASE("missing arguments") {
    CHECK(cli::run("run --scenario scenario.json", dir).exit_code == 1);
    CHECK(cli::run("", dir).exit_code == 1);
  }
}

TEST_CASE("compare and extrapolate") {
  fixture::TempDir dir;
  cli::stage(dir, one_unit());
  REQUIRE(cli::run(cli::run_args("adblock-on", "a.json"), dir).exit_code == 0);
  REQUIRE(cli::run(cli::run_args("adblock-off", "b.json"), dir).exit_code == 0);
  REQUIRE(cli::run("compare a.json b.json --out cmp.json", dir).exit_code == 0);
  const auto cmp = json::parse(fixture::read(dir / "cmp.json"));
  CHECK(cmp["units"]["Login"]["delta_energy_j"]["machine"].get<double>() == 0.0);

  SUBCASE("schema mismatch") {
    auto b = json::parse(fixture::read(dir / "b.json"));
    b["schema_version"] = "2.0";
    fixture::write(dir / "b2.json", b.dump());
    CHECK(cli::run("compare a.json b2.json --out c.json", dir).exit_code == 1);
  }
  SUBCASE("disjoint unit sets") {
    auto b = json::parse(fixture::read(dir / "b.json"));
    auto units = json::object();
    units["Reply"] = b["units"]["Login"];
    b["units"] = units;
    fixture::write(dir / "b3.json", b.dump());
    const auto r = cli::run("compare a.json b3.json --out c.json", dir);
    CHECK(r.exit_code == 1);
  }
  SUBCASE("extrapolate") {
    REQUIRE(cli::run("extrapolate --per-kwh 1e-6 --per-kgco2e 0 --daily-volume 3.33e11 --out e.json", dir).exit_code == 0);
    const auto e = json::parse(fixture::read(dir / "e.json"));
    CHECK(e["annual_energy_kwh"].get<double>() == doctest::Approx(1.21545e8));
  }
}
