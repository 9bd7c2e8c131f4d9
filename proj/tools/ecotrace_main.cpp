// ecotrace command-line entry point.
//
//   ecotrace run --scenario <file> --factors <file> --machine <file>
//                --config <label> --out <file|-> [--keep-going] [--no-timestamp]
//                [--csv <file>] [--trace-dir <dir>] [--quiet]
//   ecotrace compare <A> <B> --out <file|-> [--t-threshold <x>]
//   ecotrace extrapolate --per-kwh <x> --per-kgco2e <y> --daily-volume <n> --out <file|->
//
// Exit codes: 0 success, 1 validation, 2 run/protocol, 3 I/O.

#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ecotrace/analysis.hpp"
#include "ecotrace/error.hpp"
#include "ecotrace/report.hpp"
#include "ecotrace/sampling.hpp"
#include "ecotrace/scenario.hpp"

namespace {

using namespace ecotrace;
namespace fs = std::filesystem;

void write_output(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'", path);
  out << content;
  out.close();
  if (!out) throw Error(ErrorKind::io, "failed writing '" + path + "'", path);
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_safe(std::string s) {
  for (auto& c : s)
    if (c == ' ' || c == '/') c = '_';
  return s;
}

struct RunArgs {
  std::string scenario;
  std::string factors;
  std::string machine;
  std::string config;
  std::string out;
  std::string csv;
  std::string trace_dir;
  bool keep_going = false;
  bool no_timestamp = false;
  bool quiet = false;
};

int cmd_run(const RunArgs& args) {
  const auto spec = load_scenario(args.scenario);
  const auto factors = load_factors(args.factors);
  const auto machine = load_machine(args.machine);
  const auto* config = spec.find_configuration(args.config);
  if (!config) {
    throw Error(ErrorKind::validation,
                "configuration '" + args.config + "' is not declared in the scenario", args.config);
  }

  CampaignOptions options;
  options.keep_going = args.keep_going;
  if (!args.quiet) options.progress = [](const std::string& msg) { std::cerr << msg << '\n'; };
  const auto campaign = run_campaign(spec, *config, options);

  auto report = build_report(spec, campaign, factors, machine);
  if (!args.no_timestamp) report.generated_at = utc_timestamp();
  write_output(args.out, dump_document(to_json(report)));
  if (!args.csv.empty()) write_output(args.csv, report_to_csv(report));

  if (!args.trace_dir.empty()) {
    const fs::path dir = fs::path(args.trace_dir) / file_safe(config->label);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create '" + dir.string() + "'", dir.string());
    for (const auto& [unit, runs] : campaign.runs) {
      for (const auto& r : runs) {
        write_output((dir / (file_safe(unit) + "_run" + std::to_string(r.run_index) + ".trace"))
                         .string(),
                     format_replay(r.trace));
      }
    }
  }
  if (!campaign.complete()) {
    std::cerr << "warning: campaign incomplete, " << campaign.failures.size()
              << " run(s) failed\n";
  }
  return 0;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& out,
                std::optional<double> t_threshold) {
  const auto left = report_from_json(read_json_file(a));
  const auto right = report_from_json(read_json_file(b));
  if (left.schema_version != right.schema_version) {
    throw Error(ErrorKind::validation,
                "schema mismatch: '" + left.schema_version + "' vs '" + right.schema_version + "'",
                "schema_version");
  }
  const auto report = compare(left.summary(), right.summary());
  write_output(out, dump_document(to_json(report, ComparisonOptions{t_threshold})));
  return 0;
}

int cmd_extrapolate(double per_kwh, double per_kgco2e, double daily_volume,
                    const std::string& out) {
  const auto totals = extrapolate(per_kwh, per_kgco2e, daily_volume);
  write_output(out, dump_document(to_json(totals, per_kwh, per_kgco2e, daily_volume)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecotrace: user-side energy and emission footprint of scripted service use"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a campaign and write a report");
  run_cmd->add_option("--scenario", run.scenario, "Scenario file")->required();
  run_cmd->add_option("--factors", run.factors, "Emission factor file")->required();
  run_cmd->add_option("--machine", run.machine, "Machine profile file")->required();
  run_cmd->add_option("--config", run.config, "Configuration label")->required();
  run_cmd->add_option("--out", run.out, "Report path, or - for stdout")->required();
  run_cmd->add_option("--csv", run.csv, "Also write a flat CSV export");
  run_cmd->add_option("--trace-dir", run.trace_dir, "Write every run's trace in replay format");
  run_cmd->add_flag("--keep-going", run.keep_going, "Record failed runs and continue");
  run_cmd->add_flag("--no-timestamp", run.no_timestamp, "Omit generated_at for golden files");
  run_cmd->add_flag("-q,--quiet", run.quiet, "No progress lines");

  std::string report_a;
  std::string report_b;
  std::string compare_out;
  std::optional<double> t_threshold;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare two reports (B - A)");
  cmp_cmd->add_option("A", report_a, "Left report")->required();
  cmp_cmd->add_option("B", report_b, "Right report")->required();
  cmp_cmd->add_option("--out", compare_out, "Output path, or - for stdout")->required();
  cmp_cmd->add_option("--t-threshold", t_threshold, "Flag channels with |welch_t| above this");

  double per_kwh = 0.0;
  double per_kgco2e = 0.0;
  double daily_volume = 0.0;
  std::string extrap_out;
  auto* ext_cmd = app.add_subcommand("extrapolate", "Scale per-interaction values to a year");
  ext_cmd->add_option("--per-kwh", per_kwh, "Energy per interaction, kWh")->required();
  ext_cmd->add_option("--per-kgco2e", per_kgco2e, "Emissions per interaction, kgCO2e")->required();
  ext_cmd->add_option("--daily-volume", daily_volume, "Interactions per day")->required();
  ext_cmd->add_option("--out", extrap_out, "Output path, or - for stdout")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*cmp_cmd) return cmd_compare(report_a, report_b, compare_out, t_threshold);
    if (*ext_cmd) return cmd_extrapolate(per_kwh, per_kgco2e, daily_volume, extrap_out);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
