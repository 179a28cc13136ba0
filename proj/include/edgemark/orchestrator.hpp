#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "edgemark/config.hpp"
#include "edgemark/report.hpp"

namespace edgemark {

struct RunOptions {
  /// Overrides procfs for the live sampler.
  std::shared_ptr<ResourceProbe> probe;
  /// Progress lines; silent when empty.
  std::function<void(const std::string&)> log;
};

/// Runs every configured seed. Never throws for failures inside a seed; those
/// mark the report partial or failed. Dataset and config errors propagate.
RunReport run_benchmark(const BenchmarkConfig& config, const RunOptions& options = {});

struct SeedMetrics {
  QualityScores quality;
  MetricInputs inputs;
  TableRow row;
  Indices indices;
};

/// Per-seed reduction shared by run_benchmark and `edgemark replay`.
/// Utilization is the During-phase system average; power and energy come from
/// the span between the first request and the last response.
SeedMetrics compute_seed_metrics(std::span<const InferenceRecord> records, const Dataset& dataset,
                                 const TelemetryTrace& telemetry, const std::optional<PowerTrace>& power,
                                 int q_bits, double flops_per_inference, const std::string& device);

/// Mean row over seeds: the per-seed columns are averaged, then time per
/// inference and FLOPS are recomputed from the mean time. Throws
/// Precondition for an empty list.
TableRow aggregate_rows(std::span<const TableRow> rows, std::size_t n_inferences, double flops_per_inference);

/// 16 hex digits of FNV-1a over the compact config dump.
std::string config_hash(const nlohmann::ordered_json& config);

/// EDGEMARK_OUTPUT_DIR when set, otherwise config.output_dir.
std::string resolve_output_dir(const BenchmarkConfig& config);

/// Writes report.json, table_row.csv, plotdata.json (when at least two seeds
/// completed) and the per-seed CSVs. Returns the written paths.
std::vector<std::string> persist_report(const RunReport& report, const std::string& dir);

}  // namespace edgemark
