#include "edgemark/orchestrator.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "edgemark/csv.hpp"
#include "edgemark/error.hpp"

namespace edgemark {

namespace {

std::string host_name() {
  char buf[256] = {};
  if (gethostname(buf, sizeof buf - 1) != 0) return "unknown";
  return buf;
}

std::int64_t ms_to_us(double ms) { return std::llround(ms * 1000.0); }

/// Rethrows `e` with the phase prepended, keeping the code.
[[noreturn]] void in_phase(const std::string& phase, const Error& e) {
  throw Error(e.code(), phase + ": " + e.message(), e.line());
}

class SeedRun {
 public:
  SeedRun(const BenchmarkConfig& config, const Dataset& dataset, std::uint64_t seed, const RunOptions& options)
      : config_(config), dataset_(dataset), seed_(seed), options_(options) {
    if (config.simulated_clock())
      clock_ = std::make_shared<VirtualClock>(0);
    else
      clock_ = std::make_shared<SteadyClock>();
  }

  SeedResult run() {
    SeedResult result;
    result.seed = seed_;
    try {
      window(Phase::Pre, result);
      spawn(result);
      during(result);
      result.runner_exit = session_->shutdown();
      session_.reset();
      window(Phase::Post, result);

      auto m = compute_seed_metrics(result.records, dataset_, result.telemetry, result.power, config_.q_bits(),
                                    config_.flops_per_inference(), config_.device.name);
      result.quality = m.quality;
      result.inputs = m.inputs;
      result.row = m.row;
      result.indices = m.indices;
      result.completed = true;
    } catch (const std::exception& e) {
      result.error = e.what();
      if (session_) result.runner_exit = session_->shutdown();
      session_.reset();
    }
    return result;
  }

 private:
  void log(const std::string& line) const {
    if (options_.log) options_.log("seed " + std::to_string(seed_) + ": " + line);
  }

  /// System-only sampling before spawn or after exit.
  void window(Phase phase, SeedResult& result) {
    const std::string name(to_string(phase));
    log(name + " window");
    try {
      const std::int64_t start = clock_->now_us();
      const std::int64_t length = static_cast<std::int64_t>(config_.phase_window_ms) * 1000;
      TelemetryTrace part;
      if (clock_->simulated()) {
        clock_->sleep_us(length);
        part = synthesize_trace(*config_.synthetic_load, start, start + length, config_.telemetry_interval_ms,
                                phase, std::nullopt);
      } else {
        auto sampler = start_sampler(0, config_.telemetry_interval_ms, phase, options_.probe, clock_);
        clock_->sleep_us(length);
        part = sampler.stop();
      }
      merge_into(result.telemetry, part);
      result.telemetry.interval_ms = config_.telemetry_interval_ms;
    } catch (const Error& e) {
      in_phase(name, e);
    }
  }

  void spawn(SeedResult& result) {
    log("spawning runner");
    try {
      if (const auto* sim = std::get_if<SimulatorConfig>(&config_.runner)) {
        SimProfile profile = sim->profile;
        if (profile.confusion.empty())
          profile = SimProfile::identity(dataset_.label_set.size(), profile.latency, profile.seed);
        profile.seed = mix_seed(profile.seed, seed_);
        profile.validate(dataset_.label_set.size());
        session_ = spawn_simulator(profile, dataset_, clock_, SimulatorInit{sim->model_path, sim->q_bits});
      } else {
        RunnerSpec spec = std::get<RunnerSpec>(config_.runner);
        spec.env["EDGEMARK_SEED"] = std::to_string(seed_);
        session_ = spawn_runner(spec, dataset_.label_set, clock_);
      }
    } catch (const Error& e) {
      in_phase("spawn", e);
    }
    result.runner_name = session_->runner_name();
    result.runner_pid = session_->pid();
    result.telemetry.target_pid = session_->pid();
  }

  void during(SeedResult& result) {
    log("running " + std::to_string(dataset_.samples.size()) + " samples");
    const std::int64_t start = clock_->now_us();
    std::optional<SamplerHandle> sampler;
    std::unique_ptr<SerialCapture> serial;
    try {
      if (!clock_->simulated())
        sampler.emplace(start_sampler(session_->pid(), config_.telemetry_interval_ms, Phase::During,
                                      options_.probe, clock_));
      switch (config_.power.kind) {
        case PowerSource::Kind::None:
          break;
        case PowerSource::Kind::Replay:
          result.power = load_replay(csv::read_file(config_.power.path), config_.sensor, start);
          break;
        case PowerSource::Kind::Serial:
          serial = std::make_unique<SerialCapture>(config_.power.path, config_.power.baud, config_.sensor, clock_);
          serial->start();
          break;
      }

      for (int i = 0; i < config_.warmup; ++i)
        session_->predict(dataset_.samples[static_cast<std::size_t>(i) % dataset_.samples.size()]);
      result.records.reserve(dataset_.samples.size());
      for (const auto& sample : dataset_.samples) result.records.push_back(session_->predict(sample));
    } catch (const Error& e) {
      if (sampler) {
        try {
          merge_into(result.telemetry, sampler->stop());
        } catch (const Error&) {
        }
      }
      if (serial) result.power = serial->stop();
      in_phase("during", e);
    }

    TelemetryTrace part;
    if (sampler)
      part = sampler->stop();
    else
      part = synthesize_trace(*config_.synthetic_load, start, clock_->now_us(), config_.telemetry_interval_ms,
                              Phase::During, session_->pid());
    merge_into(result.telemetry, part);
    if (serial) {
      result.power = serial->stop();
      if (serial->malformed_frames() > 0)
        log("skipped " + std::to_string(serial->malformed_frames()) + " malformed power frames");
    }
  }

  const BenchmarkConfig& config_;
  const Dataset& dataset_;
  std::uint64_t seed_;
  const RunOptions& options_;
  std::shared_ptr<Clock> clock_;
  std::unique_ptr<RunnerSession> session_;
};

}  // namespace

SeedMetrics compute_seed_metrics(std::span<const InferenceRecord> records, const Dataset& dataset,
                                 const TelemetryTrace& telemetry, const std::optional<PowerTrace>& power,
                                 int q_bits, double flops_per_inference, const std::string& device) {
  SeedMetrics m;
  m.quality = quality(records, dataset);

  const std::int64_t first_us = ms_to_us(records.front().t_start_ms);
  const std::int64_t last_us = ms_to_us(records.back().t_end_ms);
  if (last_us <= first_us) throw Error(ErrorCode::Precondition, "records span no time");
  const double n = static_cast<double>(records.size());
  const double total_s = us_to_s(last_us - first_us);

  const UtilizationSummary util = aggregate(telemetry, Phase::During, ScopeKind::System);

  TableRow& row = m.row;
  row.device = device;
  row.q_bits = q_bits;
  row.time_s = total_s;
  row.time_per_inference_s = total_s / n;
  row.flops = flops_throughput(flops_per_inference, n, total_s);
  row.avg_accuracy = m.quality.accuracy;
  row.avg_fscore = m.quality.f_score_macro;
  row.avg_cpu_pct = util.avg_cpu_pct;
  row.avg_mem_pct = util.avg_mem_pct;

  if (power) {
    std::vector<Window> windows;
    windows.reserve(records.size());
    for (const auto& r : records) windows.push_back(Window{r.t_start_ms, r.t_end_ms});
    const auto agg = power_aggregates(*power, windows, Window{us_to_ms(first_us), us_to_ms(last_us)});
    row.power_kw = agg.power_tot_kw;
    row.power_per_inference_w = agg.power_per_inference_w;
    row.energy_j = agg.energy_tot_j;
  }

  m.inputs = inputs_from_row(row);
  m.indices = indices_from_row(row);
  return m;
}

TableRow aggregate_rows(std::span<const TableRow> rows, std::size_t n_inferences, double flops_per_inference) {
  if (rows.empty()) throw Error(ErrorCode::Precondition, "no rows to aggregate");
  auto mean = [&](auto field) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(field(r));
    return mean_and_stddev(v).mean;
  };
  auto mean_opt = [&](auto field) -> std::optional<double> {
    std::vector<double> v;
    for (const auto& r : rows) {
      auto x = field(r);
      if (!x) return std::nullopt;
      v.push_back(*x);
    }
    return mean_and_stddev(v).mean;
  };

  TableRow out;
  out.device = rows.front().device;
  out.q_bits = rows.front().q_bits;
  out.power_kw = mean_opt([](const TableRow& r) { return r.power_kw; });
  out.power_per_inference_w = mean_opt([](const TableRow& r) { return r.power_per_inference_w; });
  out.energy_j = mean_opt([](const TableRow& r) { return r.energy_j; });
  out.time_s = mean([](const TableRow& r) { return r.time_s; });
  const double n = static_cast<double>(n_inferences);
  out.time_per_inference_s = out.time_s / n;
  out.flops = flops_throughput(flops_per_inference, n, out.time_s);
  out.avg_accuracy = mean([](const TableRow& r) { return r.avg_accuracy; });
  out.avg_fscore = mean([](const TableRow& r) { return r.avg_fscore; });
  out.avg_cpu_pct = mean([](const TableRow& r) { return r.avg_cpu_pct; });
  out.avg_mem_pct = mean([](const TableRow& r) { return r.avg_mem_pct; });
  return out;
}

std::string config_hash(const nlohmann::ordered_json& config) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string resolve_output_dir(const BenchmarkConfig& config) {
  if (const char* env = std::getenv("EDGEMARK_OUTPUT_DIR"); env && *env) return env;
  return config.output_dir;
}

RunReport run_benchmark(const BenchmarkConfig& config, const RunOptions& options) {
  config.validate();
  Dataset dataset = load_dataset(config.dataset_path, LoadOptions{DatasetFormat::Csv, config.labels});

  RunReport report;
  report.config = config_to_json(config);
  report.config_hash = config_hash(report.config);
  report.dataset_path = config.dataset_path;
  report.dataset_fingerprint = dataset.fingerprint();
  report.dataset_size = dataset.samples.size();
  report.environment = {host_name(), config.simulated_clock() ? "simulated" : "steady_clock", EDGEMARK_VERSION};

  for (std::uint64_t seed : config.seeds) {
    SeedRun run(config, dataset, seed, options);
    report.seeds.push_back(run.run());
    if (!report.seeds.back().completed) {
      report.failure = "seed " + std::to_string(seed) + ": " + report.seeds.back().error;
      if (options.log) options.log(report.failure);
      break;
    }
  }

  std::vector<TableRow> rows;
  std::vector<double> acc, f1;
  for (const auto& s : report.seeds) {
    if (!s.completed) continue;
    rows.push_back(*s.row);
    acc.push_back(s.quality->accuracy);
    f1.push_back(s.quality->f_score_macro);
  }
  report.failed = rows.empty();
  report.partial = !rows.empty() && rows.size() < config.seeds.size();

  if (!rows.empty()) {
    report.accuracy = mean_and_stddev(acc);
    report.fscore = mean_and_stddev(f1);
    report.table_row = aggregate_rows(rows, dataset.samples.size(), config.flops_per_inference());
    report.inputs = inputs_from_row(*report.table_row);
    report.indices = indices_from_row(*report.table_row);
  }

  std::vector<std::string> ids;
  for (const auto& s : dataset.samples) ids.push_back(s.id);
  report.invariant_violations = check_report_invariants(report, ids);
  return report;
}

std::vector<std::string> persist_report(const RunReport& report, const std::string& dir) {
  std::vector<std::string> paths;
  paths.push_back(emit_report(report, ReportFormat::Json, dir));
  paths.push_back(emit_report(report, ReportFormat::Csv, dir));
  std::size_t completed = 0;
  for (const auto& s : report.seeds) completed += s.completed ? 1 : 0;
  if (completed >= 2) paths.push_back(emit_report(report, ReportFormat::PlotData, dir));
  for (auto& p : write_seed_artifacts(report, dir)) paths.push_back(std::move(p));
  return paths;
}

}  // namespace edgemark
