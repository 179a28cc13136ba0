#include "edgemark/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "edgemark/csv.hpp"
#include "edgemark/error.hpp"

namespace edgemark {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using nlohmann::ordered_json;

namespace {

ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

[[noreturn]] void schema(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::MalformedRow, "report " + path + ": " + what);
}

const json& at(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) schema(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) schema(path, std::string("missing '") + key + "'");
  return *it;
}

template <class T>
T val(const json& j, const char* key, const std::string& path) {
  try {
    return at(j, key, path).get<T>();
  } catch (const json::exception&) {
    schema(path + "." + key, "wrong type");
  }
}

std::optional<double> opt_val(const json& j, const char* key, const std::string& path) {
  const auto& v = at(j, key, path);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) schema(path + "." + key, "expected a number or null");
  return v.get<double>();
}

// -- leaf types ------------------------------------------------------------

ordered_json to_j(const MetricInputs& m) {
  return {{"flops_throughput", m.flops_throughput}, {"q_bits", m.q_bits},
          {"total_time_s", m.total_time_s},         {"accuracy_avg", m.accuracy_avg},
          {"fscore_avg", m.fscore_avg},             {"power_tot_kw", m.power_tot_kw},
          {"energy_tot_j", m.energy_tot_j},         {"cpu_pct_avg", m.cpu_pct_avg},
          {"mem_pct_avg", m.mem_pct_avg}};
}

MetricInputs inputs_from(const json& j, const std::string& p) {
  MetricInputs m;
  m.flops_throughput = val<double>(j, "flops_throughput", p);
  m.q_bits = val<int>(j, "q_bits", p);
  m.total_time_s = val<double>(j, "total_time_s", p);
  m.accuracy_avg = val<double>(j, "accuracy_avg", p);
  m.fscore_avg = val<double>(j, "fscore_avg", p);
  m.power_tot_kw = val<double>(j, "power_tot_kw", p);
  m.energy_tot_j = val<double>(j, "energy_tot_j", p);
  m.cpu_pct_avg = val<double>(j, "cpu_pct_avg", p);
  m.mem_pct_avg = val<double>(j, "mem_pct_avg", p);
  return m;
}

ordered_json to_j(const Indices& ix) { return {{"si", ix.si}, {"mpi", opt(ix.mpi)}, {"rer", opt(ix.rer)}}; }

Indices indices_from(const json& j, const std::string& p) {
  return Indices{val<double>(j, "si", p), opt_val(j, "mpi", p), opt_val(j, "rer", p)};
}

ordered_json to_j(const TableRow& r) {
  return {{"device", r.device},
          {"q_bits", r.q_bits},
          {"power_kw", opt(r.power_kw)},
          {"time_s", r.time_s},
          {"power_per_inference_w", opt(r.power_per_inference_w)},
          {"time_per_inference_s", r.time_per_inference_s},
          {"flops", r.flops},
          {"avg_accuracy", r.avg_accuracy},
          {"avg_fscore", r.avg_fscore},
          {"avg_cpu_pct", r.avg_cpu_pct},
          {"avg_mem_pct", r.avg_mem_pct},
          {"energy_j", opt(r.energy_j)}};
}

TableRow row_from(const json& j, const std::string& p) {
  TableRow r;
  r.device = val<std::string>(j, "device", p);
  r.q_bits = val<int>(j, "q_bits", p);
  r.power_kw = opt_val(j, "power_kw", p);
  r.time_s = val<double>(j, "time_s", p);
  r.power_per_inference_w = opt_val(j, "power_per_inference_w", p);
  r.time_per_inference_s = val<double>(j, "time_per_inference_s", p);
  r.flops = val<double>(j, "flops", p);
  r.avg_accuracy = val<double>(j, "avg_accuracy", p);
  r.avg_fscore = val<double>(j, "avg_fscore", p);
  r.avg_cpu_pct = val<double>(j, "avg_cpu_pct", p);
  r.avg_mem_pct = val<double>(j, "avg_mem_pct", p);
  r.energy_j = opt_val(j, "energy_j", p);
  return r;
}

ordered_json to_j(const QualityScores& q) {
  return {{"accuracy", q.accuracy},
          {"f_score_macro", q.f_score_macro},
          {"labels", q.labels},
          {"per_class_precision", q.per_class_precision},
          {"per_class_recall", q.per_class_recall},
          {"per_class_f1", q.per_class_f1},
          {"n_correct", q.n_correct},
          {"n_total", q.n_total}};
}

QualityScores quality_from(const json& j, const std::string& p) {
  QualityScores q;
  q.accuracy = val<double>(j, "accuracy", p);
  q.f_score_macro = val<double>(j, "f_score_macro", p);
  q.labels = val<std::vector<std::string>>(j, "labels", p);
  q.per_class_precision = val<std::vector<double>>(j, "per_class_precision", p);
  q.per_class_recall = val<std::vector<double>>(j, "per_class_recall", p);
  q.per_class_f1 = val<std::vector<double>>(j, "per_class_f1", p);
  q.n_correct = val<std::size_t>(j, "n_correct", p);
  q.n_total = val<std::size_t>(j, "n_total", p);
  return q;
}

ordered_json to_j(const MeanStd& m) { return {{"mean", m.mean}, {"stddev", m.stddev}, {"n", m.n}}; }

MeanStd meanstd_from(const json& j, const std::string& p) {
  return MeanStd{val<double>(j, "mean", p), val<double>(j, "stddev", p), val<std::size_t>(j, "n", p)};
}

ordered_json to_j(const ExitStatus& s) {
  static const char* kinds[] = {"exited", "signaled", "killed"};
  return {{"kind", kinds[static_cast<int>(s.kind)]}, {"code", s.code}};
}

ExitStatus exit_from(const json& j, const std::string& p) {
  auto kind = val<std::string>(j, "kind", p);
  ExitStatus s;
  if (kind == "exited") s.kind = ExitStatus::Kind::Exited;
  else if (kind == "signaled") s.kind = ExitStatus::Kind::Signaled;
  else if (kind == "killed") s.kind = ExitStatus::Kind::Killed;
  else schema(p + ".kind", "unknown exit kind");
  s.code = val<int>(j, "code", p);
  return s;
}

ordered_json to_j(const InferenceRecord& r) {
  return {{"sample_id", r.sample_id},   {"predicted_label", r.predicted_label.name},
          {"latency_s", r.latency_s},   {"t_start_ms", r.t_start_ms},
          {"t_end_ms", r.t_end_ms},     {"runner_latency_s", opt(r.runner_latency_s)}};
}

InferenceRecord record_from(const json& j, const std::string& p) {
  InferenceRecord r;
  r.sample_id = val<std::string>(j, "sample_id", p);
  r.predicted_label = ClassLabel{val<std::string>(j, "predicted_label", p)};
  r.latency_s = val<double>(j, "latency_s", p);
  r.t_start_ms = val<double>(j, "t_start_ms", p);
  r.t_end_ms = val<double>(j, "t_end_ms", p);
  r.runner_latency_s = opt_val(j, "runner_latency_s", p);
  return r;
}

ordered_json to_j(const TelemetryTrace& t) {
  ordered_json samples = ordered_json::array();
  for (const auto& s : t.samples)
    samples.push_back(ordered_json::array({s.t_mono_ms, to_string(s.scope), to_string(s.phase), s.cpu_pct, s.mem_pct}));
  return {{"interval_ms", t.interval_ms},
          {"target_pid", t.target_pid},
          {"columns", {"t_mono_ms", "scope", "phase", "cpu_pct", "mem_pct"}},
          {"samples", samples}};
}

TelemetryTrace telemetry_from(const json& j, const std::string& p) {
  TelemetryTrace t;
  t.interval_ms = val<int>(j, "interval_ms", p);
  t.target_pid = val<int>(j, "target_pid", p);
  for (const auto& s : at(j, "samples", p)) {
    if (!s.is_array() || s.size() != 5) schema(p + ".samples", "expected 5-element rows");
    auto scope = parse_scope(s[1].get<std::string>());
    auto phase = parse_phase(s[2].get<std::string>());
    if (!scope || !phase) schema(p + ".samples", "bad scope or phase");
    t.samples.push_back(TelemetrySample{s[0].get<double>(), *scope, s[3].get<double>(), s[4].get<double>(), *phase});
  }
  return t;
}

ordered_json to_j(const SensorConfig& c) {
  ordered_json j{{"v_ref", c.v_ref}, {"adc_resolution", c.adc_resolution}, {"supply_voltage", c.supply_voltage}};
  j["calibration"] = c.calibration ? ordered_json{{"offset_counts", c.calibration->offset_counts},
                                                  {"sensitivity_v_per_a", c.calibration->sensitivity_v_per_a}}
                                   : ordered_json(nullptr);
  return j;
}

SensorConfig sensor_from(const json& j, const std::string& p) {
  SensorConfig c;
  c.v_ref = val<double>(j, "v_ref", p);
  c.adc_resolution = val<int>(j, "adc_resolution", p);
  c.supply_voltage = val<double>(j, "supply_voltage", p);
  const auto& cal = at(j, "calibration", p);
  if (!cal.is_null())
    c.calibration = Calibration{val<double>(cal, "offset_counts", p), val<double>(cal, "sensitivity_v_per_a", p)};
  return c;
}

ordered_json to_j(const PowerTrace& t) {
  ordered_json samples = ordered_json::array();
  for (const auto& s : t.samples)
    samples.push_back(ordered_json::array({s.t_device_ms, s.t_mono_ms, s.adc_count, s.current_a, s.power_w}));
  return {{"config", to_j(t.config)},
          {"columns", {"t_device_ms", "t_mono_ms", "adc_count", "current_a", "power_w"}},
          {"samples", samples}};
}

PowerTrace power_from(const json& j, const std::string& p) {
  PowerTrace t;
  t.config = sensor_from(at(j, "config", p), p + ".config");
  for (const auto& s : at(j, "samples", p)) {
    if (!s.is_array() || s.size() != 5) schema(p + ".samples", "expected 5-element rows");
    t.samples.push_back(PowerSample{s[0].get<double>(), s[1].get<double>(), s[2].get<int>(), s[3].get<double>(),
                                    s[4].get<double>()});
  }
  return t;
}

template <class T, class F>
ordered_json opt_obj(const std::optional<T>& v, F&& f) {
  return v ? f(*v) : ordered_json(nullptr);
}

ordered_json to_j(const SeedResult& s) {
  ordered_json j;
  j["seed"] = s.seed;
  j["completed"] = s.completed;
  j["error"] = s.error;
  j["runner_name"] = s.runner_name;
  j["runner_pid"] = s.runner_pid;
  j["runner_exit"] = opt_obj(s.runner_exit, [](const ExitStatus& e) { return to_j(e); });
  j["quality"] = opt_obj(s.quality, [](const QualityScores& q) { return to_j(q); });
  j["inputs"] = opt_obj(s.inputs, [](const MetricInputs& m) { return to_j(m); });
  j["indices"] = opt_obj(s.indices, [](const Indices& i) { return to_j(i); });
  j["table_row"] = opt_obj(s.row, [](const TableRow& r) { return to_j(r); });
  ordered_json recs = ordered_json::array();
  for (const auto& r : s.records) recs.push_back(to_j(r));
  j["records"] = recs;
  j["telemetry"] = to_j(s.telemetry);
  j["power"] = opt_obj(s.power, [](const PowerTrace& t) { return to_j(t); });
  return j;
}

template <class F>
auto opt_from(const json& j, const char* key, const std::string& p, F&& f)
    -> std::optional<decltype(f(j, p))> {
  const auto& v = at(j, key, p);
  if (v.is_null()) return std::nullopt;
  return f(v, p + "." + key);
}

SeedResult seed_from(const json& j, const std::string& p) {
  SeedResult s;
  s.seed = val<std::uint64_t>(j, "seed", p);
  s.completed = val<bool>(j, "completed", p);
  s.error = val<std::string>(j, "error", p);
  s.runner_name = val<std::string>(j, "runner_name", p);
  s.runner_pid = val<int>(j, "runner_pid", p);
  s.runner_exit = opt_from(j, "runner_exit", p, exit_from);
  s.quality = opt_from(j, "quality", p, quality_from);
  s.inputs = opt_from(j, "inputs", p, inputs_from);
  s.indices = opt_from(j, "indices", p, indices_from);
  s.row = opt_from(j, "table_row", p, row_from);
  const auto& recs = at(j, "records", p);
  for (std::size_t i = 0; i < recs.size(); ++i)
    s.records.push_back(record_from(recs[i], p + ".records[" + std::to_string(i) + "]"));
  s.telemetry = telemetry_from(at(j, "telemetry", p), p + ".telemetry");
  s.power = opt_from(j, "power", p, power_from);
  return s;
}

}  // namespace

ordered_json report_to_json(const RunReport& r) {
  ordered_json j;
  j["schema"] = "edgemark.run_report/1";
  j["status"] = r.failed ? "failed" : r.partial ? "partial" : "complete";
  j["failure"] = r.failure;
  j["invariant_violations"] = r.invariant_violations;
  j["config"] = r.config;
  j["config_hash"] = r.config_hash;
  j["dataset"] = {{"path", r.dataset_path}, {"fingerprint", r.dataset_fingerprint}, {"size", r.dataset_size}};
  j["f_score_averaging"] = r.f_score_averaging;
  j["inputs"] = opt_obj(r.inputs, [](const MetricInputs& m) { return to_j(m); });
  j["accuracy"] = opt_obj(r.accuracy, [](const MeanStd& m) { return to_j(m); });
  j["fscore"] = opt_obj(r.fscore, [](const MeanStd& m) { return to_j(m); });
  j["indices"] = opt_obj(r.indices, [](const Indices& i) { return to_j(i); });
  j["table_row"] = opt_obj(r.table_row, [](const TableRow& t) { return to_j(t); });
  ordered_json seeds = ordered_json::array();
  for (const auto& s : r.seeds) seeds.push_back(to_j(s));
  j["seeds"] = seeds;
  j["environment"] = {{"host", r.environment.host},
                      {"clock_source", r.environment.clock_source},
                      {"harness_version", r.environment.harness_version}};
  return j;
}

RunReport report_from_json(const json& j) {
  const std::string p = "$";
  if (val<std::string>(j, "schema", p) != "edgemark.run_report/1") schema(p + ".schema", "unsupported schema");
  RunReport r;
  const auto status = val<std::string>(j, "status", p);
  if (status != "complete" && status != "partial" && status != "failed") schema(p + ".status", "unknown status");
  r.failed = status == "failed";
  r.partial = status == "partial";
  r.failure = val<std::string>(j, "failure", p);
  r.invariant_violations = val<std::vector<std::string>>(j, "invariant_violations", p);
  r.config = ordered_json(at(j, "config", p));
  r.config_hash = val<std::string>(j, "config_hash", p);
  const auto& ds = at(j, "dataset", p);
  r.dataset_path = val<std::string>(ds, "path", p + ".dataset");
  r.dataset_fingerprint = val<std::string>(ds, "fingerprint", p + ".dataset");
  r.dataset_size = val<std::size_t>(ds, "size", p + ".dataset");
  r.f_score_averaging = val<std::string>(j, "f_score_averaging", p);
  r.inputs = opt_from(j, "inputs", p, inputs_from);
  r.accuracy = opt_from(j, "accuracy", p, meanstd_from);
  r.fscore = opt_from(j, "fscore", p, meanstd_from);
  r.indices = opt_from(j, "indices", p, indices_from);
  r.table_row = opt_from(j, "table_row", p, row_from);
  const auto& seeds = at(j, "seeds", p);
  for (std::size_t i = 0; i < seeds.size(); ++i)
    r.seeds.push_back(seed_from(seeds[i], p + ".seeds[" + std::to_string(i) + "]"));
  const auto& env = at(j, "environment", p);
  r.environment.host = val<std::string>(env, "host", p + ".environment");
  r.environment.clock_source = val<std::string>(env, "clock_source", p + ".environment");
  r.environment.harness_version = val<std::string>(env, "harness_version", p + ".environment");
  return r;
}

std::string report_to_string(const RunReport& report) { return report_to_json(report).dump(2) + "\n"; }

RunReport load_report(const std::string& path) {
  const std::string text = csv::read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedRow, path + ": " + e.what());
  }
  return report_from_json(j);
}

std::vector<std::string> check_report_invariants(const RunReport& report, const std::vector<std::string>& ids) {
  std::vector<std::string> out;
  for (const auto& s : report.seeds) {
    if (!s.completed) continue;
    std::map<std::string, int> counts;
    for (const auto& r : s.records) ++counts[r.sample_id];
    bool ok = counts.size() == ids.size();
    for (const auto& id : ids) ok = ok && counts.count(id) && counts[id] == 1;
    if (!ok) out.push_back("seed " + std::to_string(s.seed) + ": records do not cover every sample exactly once");
    std::string why;
    if (!trace_is_well_formed(s.telemetry, &why))
      out.push_back("seed " + std::to_string(s.seed) + ": telemetry " + why);
  }
  std::vector<TableRow> rows;
  for (const auto& s : report.seeds)
    if (s.completed && s.row) rows.push_back(*s.row);
  if (report.table_row) rows.push_back(*report.table_row);
  auto cons = check_consistency(rows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!cons.rows[i].count_ok)
      out.push_back("table row " + std::to_string(i) + ": power and time imply different inference counts");
    if (!cons.rows[i].flops_ok)
      out.push_back("table row " + std::to_string(i) + ": FLOPS x time per inference is not constant");
  }
  return out;
}

// -- files -----------------------------------------------------------------

namespace {

std::ofstream open_out(const fs::path& path) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace

void render_report(const RunReport& report, ReportFormat format, std::ostream& out) {
  switch (format) {
    case ReportFormat::Json:
      out << report_to_string(report);
      break;
    case ReportFormat::Csv: {
      std::vector<TableRow> rows;
      if (report.table_row) rows.push_back(*report.table_row);
      write_table_csv(out, rows);
      break;
    }
    case ReportFormat::PlotData: {
      std::vector<TableRow> rows;
      std::vector<std::string> labels;
      for (const auto& s : report.seeds)
        if (s.completed && s.row) {
          rows.push_back(*s.row);
          labels.push_back("seed " + std::to_string(s.seed));
        }
      out << plot_data_json(rows, labels) << '\n';
      break;
    }
  }
}

std::string emit_report(const RunReport& report, ReportFormat format, const std::string& dir) {
  static const char* names[] = {"report.json", "table_row.csv", "plotdata.json"};
  const fs::path path = fs::path(dir) / names[static_cast<int>(format)];
  std::ostringstream text;
  render_report(report, format, text);
  auto out = open_out(path);
  out << text.str();
  finish(out, path);
  return path.string();
}

void write_records_csv(std::ostream& out, std::span<const InferenceRecord> records) {
  out << "sample_id,predicted_label,latency_s,t_start_ms,t_end_ms,runner_latency_s\n";
  for (const auto& r : records)
    csv::write_row(out, {r.sample_id, r.predicted_label.name, csv::format_double(r.latency_s),
                         csv::format_double(r.t_start_ms), csv::format_double(r.t_end_ms),
                         csv::format_optional(r.runner_latency_s)});
}

std::vector<InferenceRecord> read_records_csv(std::string_view text) {
  auto records = csv::parse(text);
  if (records.empty() ||
      records[0].fields != std::vector<std::string>{"sample_id", "predicted_label", "latency_s", "t_start_ms",
                                                    "t_end_ms", "runner_latency_s"})
    throw Error(ErrorCode::MalformedRow,
                "records header must be sample_id,predicted_label,latency_s,t_start_ms,t_end_ms,runner_latency_s", 1);
  std::vector<InferenceRecord> out;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i].fields;
    if (f.size() != 6) throw Error(ErrorCode::MalformedRow, "expected 6 fields", records[i].line);
    auto lat = csv::parse_double(f[2]);
    auto t0 = csv::parse_double(f[3]);
    auto t1 = csv::parse_double(f[4]);
    if (!lat || !t0 || !t1) throw Error(ErrorCode::MalformedRow, "unparseable record", records[i].line);
    InferenceRecord r{f[0], ClassLabel{f[1]}, *lat, *t0, *t1, std::nullopt};
    if (!f[5].empty()) r.runner_latency_s = csv::parse_double(f[5]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::string> write_seed_artifacts(const RunReport& report, const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& s : report.seeds) {
    const std::string suffix = "_seed" + std::to_string(s.seed) + ".csv";
    {
      auto path = fs::path(dir) / ("records" + suffix);
      auto out = open_out(path);
      write_records_csv(out, s.records);
      finish(out, path);
      paths.push_back(path.string());
    }
    {
      auto path = fs::path(dir) / ("telemetry" + suffix);
      auto out = open_out(path);
      write_trace_csv(out, s.telemetry);
      finish(out, path);
      paths.push_back(path.string());
    }
    if (s.power) {
      auto path = fs::path(dir) / ("power" + suffix);
      auto out = open_out(path);
      write_power_csv(out, *s.power);
      finish(out, path);
      paths.push_back(path.string());
    }
  }
  return paths;
}

// -- comparison ------------------------------------------------------------

bool higher_is_better(const std::string& a) {
  static const std::vector<std::string> higher{"flops", "avg_accuracy", "avg_fscore", "si", "mpi", "rer"};
  return std::find(higher.begin(), higher.end(), a) != higher.end();
}

ComparisonTable compare(std::span<const ComparisonEntry> entries) {
  if (entries.size() < 2) throw Error(ErrorCode::TooFewRows, "comparison needs at least two reports");
  for (const auto& e : entries)
    if (e.dataset_fingerprint != entries.front().dataset_fingerprint)
      throw Error(ErrorCode::DatasetMismatch,
                  "'" + e.name + "' was run on a different dataset than '" + entries.front().name + "'");
  ComparisonTable t;
  t.attributes = plot_attributes();
  t.attributes.insert(t.attributes.end(), {"si", "mpi", "rer"});
  for (const auto& e : entries) {
    t.names.push_back(e.name);
    auto v = attribute_vector(e.row);
    v.push_back(e.indices.si);
    v.push_back(e.indices.mpi.value_or(0.0));
    v.push_back(e.indices.rer.value_or(0.0));
    t.values.push_back(std::move(v));
  }
  t.normalized = normalize_attributes(t.values);
  for (std::size_t a = 0; a < t.attributes.size(); ++a) {
    const bool higher = higher_is_better(t.attributes[a]);
    std::size_t best = 0;
    for (std::size_t i = 1; i < t.values.size(); ++i) {
      const double v = t.values[i][a], b = t.values[best][a];
      if (higher ? v > b : v < b) best = i;
    }
    t.best_row.push_back(best);
  }
  return t;
}

ComparisonTable compare(std::span<const RunReport> reports) {
  std::vector<ComparisonEntry> entries;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (!r.table_row || !r.indices)
      throw Error(ErrorCode::Precondition, "report " + std::to_string(i) + " has no completed seeds");
    entries.push_back(ComparisonEntry{r.table_row->device + "/" + std::to_string(r.table_row->q_bits),
                                      r.dataset_fingerprint, *r.table_row, *r.indices});
  }
  return compare(entries);
}

void write_comparison_csv(std::ostream& out, const ComparisonTable& t) {
  std::vector<std::string> header{"name"};
  for (const auto& a : t.attributes) header.push_back(a);
  for (const auto& a : t.attributes) header.push_back(a + "_norm");
  header.push_back("best_on");
  csv::write_row(out, header);
  for (std::size_t i = 0; i < t.names.size(); ++i) {
    std::vector<std::string> row{t.names[i]};
    for (double v : t.values[i]) row.push_back(csv::format_double(v));
    for (double v : t.normalized[i]) row.push_back(csv::format_double(v));
    std::string best;
    for (std::size_t a = 0; a < t.attributes.size(); ++a)
      if (t.best_row[a] == i) best += (best.empty() ? "" : ";") + t.attributes[a];
    row.push_back(best);
    csv::write_row(out, row);
  }
}

}  // namespace edgemark
