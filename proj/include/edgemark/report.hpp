#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgemark/metrics.hpp"
#include "edgemark/power.hpp"
#include "edgemark/runner.hpp"
#include "edgemark/table.hpp"
#include "edgemark/telemetry.hpp"

namespace edgemark {

struct SeedResult {
  std::uint64_t seed = 0;
  bool completed = false;
  std::string error;  // empty when completed

  std::string runner_name;
  int runner_pid = 0;
  std::optional<ExitStatus> runner_exit;

  std::vector<InferenceRecord> records;
  std::optional<QualityScores> quality;
  /// Pre, During and Post samples in one time-ordered trace.
  TelemetryTrace telemetry;
  std::optional<PowerTrace> power;

  std::optional<MetricInputs> inputs;
  std::optional<Indices> indices;
  std::optional<TableRow> row;

  friend bool operator==(const SeedResult&, const SeedResult&) = default;
};

struct EnvironmentFingerprint {
  std::string host;
  std::string clock_source;  // "steady_clock" or "simulated"
  std::string harness_version;

  friend bool operator==(const EnvironmentFingerprint&, const EnvironmentFingerprint&) = default;
};

struct RunReport {
  nlohmann::ordered_json config;  // resolved config snapshot
  std::string config_hash;
  std::string dataset_path;
  std::string dataset_fingerprint;
  std::size_t dataset_size = 0;
  std::string f_score_averaging = "macro";

  std::vector<SeedResult> seeds;

  // Aggregates over completed seeds.
  std::optional<MetricInputs> inputs;
  std::optional<MeanStd> accuracy;
  std::optional<MeanStd> fscore;
  std::optional<Indices> indices;
  std::optional<TableRow> table_row;

  EnvironmentFingerprint environment;
  /// No seed completed.
  bool failed = false;
  /// Some but not all seeds completed.
  bool partial = false;
  std::string failure;
  std::vector<std::string> invariant_violations;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

nlohmann::ordered_json report_to_json(const RunReport& report);
/// Throws MalformedRow (with a JSON path in the message) for schema errors.
RunReport report_from_json(const nlohmann::ordered_json& j);
std::string report_to_string(const RunReport& report);
RunReport load_report(const std::string& path);

/// Checks every-sample-once per completed seed and the table count relation
/// when power was captured. Returns human-readable violations.
std::vector<std::string> check_report_invariants(const RunReport& report,
                                                 const std::vector<std::string>& dataset_ids);

enum class ReportFormat { Json, Csv, PlotData };

/// Plot data needs at least two completed seeds (TooFewRows).
void render_report(const RunReport& report, ReportFormat format, std::ostream& out);

/// Writes report.json, table_row.csv or plotdata.json into `dir` and returns
/// the path. Throws IoError.
std::string emit_report(const RunReport& report, ReportFormat format, const std::string& dir);
/// Writes records/telemetry/power CSVs for every seed; returns the paths.
std::vector<std::string> write_seed_artifacts(const RunReport& report, const std::string& dir);

void write_records_csv(std::ostream& out, std::span<const InferenceRecord> records);
std::vector<InferenceRecord> read_records_csv(std::string_view text);

struct ComparisonEntry {
  std::string name;
  std::string dataset_fingerprint;
  TableRow row;
  Indices indices;
};

struct ComparisonTable {
  std::vector<std::string> attributes;  // plot attributes followed by si, mpi, rer
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
  std::vector<std::vector<double>> normalized;
  /// best_row[a] is the index of the best entry for attribute a.
  std::vector<std::size_t> best_row;
};

/// Lower-is-better for time, power and utilization; higher-is-better for
/// the rest.
bool higher_is_better(const std::string& attribute);

/// Throws TooFewRows for fewer than two entries and DatasetMismatch when the
/// dataset fingerprints differ.
ComparisonTable compare(std::span<const ComparisonEntry> entries);
ComparisonTable compare(std::span<const RunReport> reports);
void write_comparison_csv(std::ostream& out, const ComparisonTable& table);

}  // namespace edgemark
