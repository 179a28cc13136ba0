#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "edgemark/config.hpp"
#include "edgemark/csv.hpp"
#include "edgemark/dataset.hpp"
#include "edgemark/error.hpp"
#include "edgemark/orchestrator.hpp"
#include "edgemark/power.hpp"
#include "edgemark/report.hpp"
#include "edgemark/runner.hpp"
#include "edgemark/table.hpp"

using namespace edgemark;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::MissingFile:
    case ErrorCode::MalformedRow:
    case ErrorCode::UnknownLabel:
    case ErrorCode::EmptyDataset:
    case ErrorCode::MalformedFrame:
    case ErrorCode::AdcOutOfRange:
      return kConfigError;
    default:
      return kFailure;
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

struct SensorFlags {
  double v_ref = 5.0;
  int resolution = 1024;
  double supply = 5.0;
  std::optional<double> offset;
  std::optional<double> sensitivity;

  void add(CLI::App* app) {
    app->add_option("--v-ref", v_ref, "ADC reference voltage")->capture_default_str();
    app->add_option("--resolution", resolution, "ADC resolution in counts")->capture_default_str();
    app->add_option("--supply-voltage", supply, "Supply voltage for P = I * V")->capture_default_str();
    app->add_option("--offset", offset, "Calibrated zero-current offset (counts)");
    app->add_option("--sensitivity", sensitivity, "Calibrated sensitivity (V/A)");
  }

  SensorConfig config() const {
    SensorConfig c;
    c.v_ref = v_ref;
    c.adc_resolution = resolution;
    c.supply_voltage = supply;
    if (offset || sensitivity) c.calibration = Calibration{offset.value_or(0.0), sensitivity.value_or(0.185)};
    c.validate();
    return c;
  }
};

std::string fmt_opt(const std::optional<double>& v) { return csv::format_optional(v); }

// -- dataset validate ------------------------------------------------------

int cmd_dataset_validate(const std::string& path, const std::string& labels) {
  LoadOptions opts;
  if (!labels.empty()) opts.labels = split_list(labels);
  const Dataset ds = load_dataset(path, opts);
  std::map<std::string, std::size_t> histogram;
  for (const auto& s : ds.samples) ++histogram[s.label.name];
  const auto stats = cleaning_stats(ds);

  std::cout << "rows: " << ds.samples.size() << '\n';
  std::cout << "labels" << (ds.labels_inferred ? " (inferred)" : "") << ":";
  for (const auto& l : ds.label_set) std::cout << ' ' << l.name;
  std::cout << '\n';
  for (const auto& l : ds.label_set) std::cout << "  " << l.name << ": " << histogram[l.name] << '\n';
  std::cout << "cleaning: " << stats.rows_changed << " rows changed, " << stats.raw_bytes << " -> "
            << stats.clean_bytes << " bytes, " << stats.rows_empty_after_cleaning << " empty after cleaning\n";
  std::cout << "fingerprint: " << ds.fingerprint() << '\n';
  return kOk;
}

// -- power convert ---------------------------------------------------------

int cmd_power_convert(const std::string& file, const SensorFlags& flags, const std::string& out_path) {
  const PowerTrace trace = load_replay(csv::read_file(file), flags.config(), 0);
  if (out_path.empty()) {
    write_power_csv(std::cout, trace);
  } else {
    std::ofstream out(out_path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + out_path);
    write_power_csv(out, trace);
  }
  return kOk;
}

// -- run -------------------------------------------------------------------

struct RunFlags {
  std::string config;
  std::string seeds;
  std::string power;
  std::string output_dir;
  bool quiet = false;
};

int cmd_run(const RunFlags& flags) {
  BenchmarkConfig config;
  try {
    config = load_config(flags.config);
    if (!flags.seeds.empty()) config.seeds = parse_seed_list(flags.seeds);
    if (!flags.power.empty()) {
      config.power = parse_power_source(flags.power);
      if (config.power.kind != PowerSource::Kind::None && !config.power.path.empty()) {
        std::filesystem::path p(config.power.path);
        if (config.power.kind == PowerSource::Kind::Replay && p.is_relative())
          config.power.path = std::filesystem::absolute(p).string();
      }
    }
    if (!flags.output_dir.empty()) config.output_dir = flags.output_dir;
    config.validate();
  } catch (const Error& e) {
    std::cerr << "edgemark: " << e.what() << '\n';
    return kConfigError;
  }

  RunOptions options;
  if (!flags.quiet) options.log = [](const std::string& line) { std::cerr << "edgemark: " << line << '\n'; };
  const auto t0 = std::chrono::steady_clock::now();
  const RunReport report = run_benchmark(config, options);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string dir = resolve_output_dir(config);
  for (const auto& p : persist_report(report, dir))
    if (!flags.quiet) std::cerr << "edgemark: wrote " << p << '\n';

  if (report.table_row) {
    write_table_csv(std::cout, std::span(&*report.table_row, 1));
    const auto& ix = *report.indices;
    std::cout << "si=" << csv::format_double(ix.si) << " mpi=" << fmt_opt(ix.mpi) << " rer=" << fmt_opt(ix.rer)
              << '\n';
  }
  for (const auto& v : report.invariant_violations) std::cerr << "edgemark: invariant violated: " << v << '\n';
  if (!flags.quiet) std::cerr << "edgemark: finished in " << wall << " s\n";

  if (report.failed || report.partial) {
    std::cerr << "edgemark: " << (report.failed ? "failed" : "partial") << ": " << report.failure << '\n';
    return kFailure;
  }
  return report.invariant_violations.empty() ? kOk : kFailure;
}

// -- replay ----------------------------------------------------------------

struct ReplayFlags {
  std::string records, telemetry, power, dataset, labels, device = "replay";
  int q_bits = 32;
  double flops_per_inference = 0;
  SensorFlags sensor;
};

int cmd_replay(const ReplayFlags& f) {
  LoadOptions opts;
  if (!f.labels.empty()) opts.labels = split_list(f.labels);
  const Dataset ds = load_dataset(f.dataset, opts);
  const auto records = read_records_csv(csv::read_file(f.records));
  if (records.empty()) throw Error(ErrorCode::EmptyRecords, "no records in " + f.records);
  const auto telemetry = read_trace_csv(csv::read_file(f.telemetry));
  std::optional<PowerTrace> power;
  if (!f.power.empty()) power = read_power_csv(csv::read_file(f.power), f.sensor.config());
  if (!valid_q_bits(f.q_bits)) throw Error(ErrorCode::InvalidConfig, "--q-bits must be 8, 16 or 32");
  if (!(f.flops_per_inference > 0))
    throw Error(ErrorCode::InvalidConfig, "--flops-per-inference must be positive");

  const auto m = compute_seed_metrics(records, ds, telemetry, power, f.q_bits, f.flops_per_inference, f.device);
  write_table_csv(std::cout, std::span(&m.row, 1));
  std::cout << "si=" << csv::format_double(m.indices.si) << " mpi=" << fmt_opt(m.indices.mpi)
            << " rer=" << fmt_opt(m.indices.rer) << '\n';
  return kOk;
}

// -- metrics ---------------------------------------------------------------

int cmd_metrics(const std::string& table, bool check) {
  const auto rows = read_table_csv(csv::read_file(table));
  std::vector<std::string> header{"device", "q_bits", "si", "mpi", "rer"};
  std::optional<ConsistencyReport> cons;
  if (check) {
    cons = check_consistency(rows);
    header.insert(header.end(), {"implied_n_power", "implied_n_time", "flops_per_inference", "flops_rel_dev",
                                 "count_ok", "flops_ok"});
  }
  csv::write_row(std::cout, header);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto ix = indices_from_row(rows[i]);
    std::vector<std::string> out{rows[i].device, std::to_string(rows[i].q_bits), csv::format_double(ix.si),
                                 fmt_opt(ix.mpi), fmt_opt(ix.rer)};
    if (cons) {
      const auto& c = cons->rows[i];
      out.insert(out.end(), {fmt_opt(c.implied_n_power), csv::format_double(c.implied_n_time),
                             csv::format_double(c.flops_per_inference), csv::format_double(c.flops_rel_dev),
                             c.count_ok ? "true" : "false", c.flops_ok ? "true" : "false"});
    }
    csv::write_row(std::cout, out);
  }
  return cons && !cons->ok ? kFailure : kOk;
}

// -- compare / report ------------------------------------------------------

int cmd_compare(const std::vector<std::string>& paths) {
  std::vector<RunReport> reports;
  for (const auto& p : paths) reports.push_back(load_report(p));
  write_comparison_csv(std::cout, compare(reports));
  return kOk;
}

int cmd_report(const std::string& path, const std::string& format, const std::string& out_dir) {
  static const std::map<std::string, ReportFormat> formats{
      {"json", ReportFormat::Json}, {"csv", ReportFormat::Csv}, {"plotdata", ReportFormat::PlotData}};
  const RunReport report = load_report(path);
  const ReportFormat fmt = formats.at(format);
  if (out_dir.empty())
    render_report(report, fmt, std::cout);
  else
    std::cerr << "edgemark: wrote " << emit_report(report, fmt, out_dir) << '\n';
  return kOk;
}

// -- sim-runner --------------------------------------------------------------

LatencyModel parse_latency(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const auto args = colon == std::string::npos ? std::vector<std::string>{} : split_list(text.substr(colon + 1));
  std::vector<double> v;
  for (const auto& a : args) {
    auto d = csv::parse_double(a);
    if (!d) throw Error(ErrorCode::InvalidConfig, "bad latency parameter '" + a + "'");
    v.push_back(*d);
  }
  if (kind == "constant" && v.size() == 1) return LatencyModel::constant(v[0]);
  if (kind == "lognormal" && v.size() == 2) return LatencyModel::log_normal(v[0], v[1]);
  throw Error(ErrorCode::InvalidConfig, "latency must be constant:<s> or lognormal:<mu>,<sigma>");
}

struct SimFlags {
  std::string dataset, labels, latency = "constant:0.01", confusion, model;
  std::uint64_t seed = 0;
  bool sleep = false;
};

int cmd_sim_runner(const SimFlags& f) {
  LoadOptions opts;
  if (!f.labels.empty()) opts.labels = split_list(f.labels);
  const Dataset ds = load_dataset(f.dataset, opts);
  SimProfile profile = SimProfile::identity(ds.label_set.size(), parse_latency(f.latency), f.seed);
  if (!f.confusion.empty() && f.confusion != "identity") {
    try {
      profile.confusion = nlohmann::json::parse(f.confusion).get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, std::string("--confusion: ") + e.what());
    }
  }
  profile.validate(ds.label_set.size());

  std::unordered_map<std::string, std::string> truth;
  for (const auto& s : ds.samples) truth.emplace(s.id, s.label.name);
  std::shared_ptr<Clock> clock;
  if (f.sleep)
    clock = std::make_shared<SteadyClock>();
  else
    clock = std::make_shared<VirtualClock>();
  SimulatorServer server(profile, std::move(truth), clock);

  for (std::string line; std::getline(std::cin, line);) {
    auto reply = server.handle(line);
    if (!reply) break;
    std::cout << *reply << '\n' << std::flush;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge inference benchmark harness"};
  app.set_version_flag("--version", EDGEMARK_VERSION);
  app.require_subcommand(1);

  auto* dataset = app.add_subcommand("dataset", "Dataset utilities");
  dataset->require_subcommand(1);
  auto* validate = dataset->add_subcommand("validate", "Check a dataset and print statistics");
  std::string ds_path, ds_labels;
  validate->add_option("path", ds_path)->required();
  validate->add_option("--labels", ds_labels, "Comma-separated label set");

  auto* power = app.add_subcommand("power", "Power trace utilities");
  power->require_subcommand(1);
  auto* convert = power->add_subcommand("convert", "Convert raw frames to current and power");
  std::string conv_file, conv_out;
  SensorFlags conv_sensor;
  convert->add_option("file", conv_file)->required();
  convert->add_option("-o,--output", conv_out, "Output CSV (default stdout)");
  conv_sensor.add(convert);

  auto* run = app.add_subcommand("run", "Run a benchmark");
  RunFlags run_flags;
  run->add_option("--config", run_flags.config, "Config file")->required();
  run->add_option("--seeds", run_flags.seeds, "Comma-separated seeds");
  run->add_option("--power", run_flags.power, "none | replay:<file> | serial:<dev>:<baud>");
  run->add_option("--output-dir", run_flags.output_dir, "Output directory");
  run->add_flag("-q,--quiet", run_flags.quiet, "No progress output");

  auto* replay = app.add_subcommand("replay", "Recompute metrics from recorded artifacts");
  ReplayFlags rf;
  replay->add_option("--records", rf.records)->required();
  replay->add_option("--telemetry", rf.telemetry)->required();
  replay->add_option("--power", rf.power, "Converted power CSV");
  replay->add_option("--dataset", rf.dataset)->required();
  replay->add_option("--labels", rf.labels);
  replay->add_option("--q-bits", rf.q_bits)->capture_default_str();
  replay->add_option("--flops-per-inference", rf.flops_per_inference)->required();
  replay->add_option("--device", rf.device)->capture_default_str();
  rf.sensor.add(replay);

  auto* metrics = app.add_subcommand("metrics", "SI, MPI and RER for a results table");
  std::string table;
  bool check = false;
  metrics->add_option("--table", table)->required();
  metrics->add_flag("--check", check, "Add consistency columns; exit 1 when a row fails");

  auto* cmp = app.add_subcommand("compare", "Compare reports side by side");
  std::vector<std::string> cmp_paths;
  cmp->add_option("reports", cmp_paths)->required()->expected(2, -1);

  auto* rep = app.add_subcommand("report", "Render a stored report");
  std::string rep_path, rep_format = "json", rep_out;
  rep->add_option("report", rep_path)->required();
  rep->add_option("--format", rep_format)->check(CLI::IsMember({"json", "csv", "plotdata"}))->capture_default_str();
  rep->add_option("--output-dir", rep_out, "Write the file here instead of stdout");

  auto* sim = app.add_subcommand("sim-runner", "Serve the simulator over the runner protocol on stdio");
  SimFlags sf;
  sim->add_option("--dataset", sf.dataset, "Dataset supplying ground truth")->required();
  sim->add_option("--labels", sf.labels);
  sim->add_option("--seed", sf.seed)->capture_default_str();
  sim->add_option("--latency", sf.latency, "constant:<s> | lognormal:<mu>,<sigma>")->capture_default_str();
  sim->add_option("--confusion", sf.confusion, "identity or a JSON matrix");
  sim->add_option("--model", sf.model, "Accepted for runner compatibility");
  sim->add_flag("--sleep", sf.sleep, "Sleep for each drawn latency");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*validate) return cmd_dataset_validate(ds_path, ds_labels);
    if (*convert) return cmd_power_convert(conv_file, conv_sensor, conv_out);
    if (*run) return cmd_run(run_flags);
    if (*replay) return cmd_replay(rf);
    if (*metrics) return cmd_metrics(table, check);
    if (*cmp) return cmd_compare(cmp_paths);
    if (*rep) return cmd_report(rep_path, rep_format, rep_out);
    if (*sim) return cmd_sim_runner(sf);
  } catch (const Error& e) {
    std::cerr << "edgemark: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "edgemark: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
