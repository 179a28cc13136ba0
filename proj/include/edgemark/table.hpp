#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgemark/metrics.hpp"

namespace edgemark {

/// One row of the model evaluation table. Power columns are empty when no
/// power source was configured; energy_j is not part of the published
/// table and may be empty.
struct TableRow {
  std::string device;
  int q_bits = 32;
  std::optional<double> power_kw;
  double time_s = 0;
  std::optional<double> power_per_inference_w;
  double time_per_inference_s = 0;
  double flops = 0;
  double avg_accuracy = 0;
  double avg_fscore = 0;
  double avg_cpu_pct = 0;
  double avg_mem_pct = 0;
  std::optional<double> energy_j;

  friend bool operator==(const TableRow&, const TableRow&) = default;
};

/// The documented CSV column list, in order.
const std::vector<std::string>& table_columns();
std::string table_header();

void write_table_csv(std::ostream& out, std::span<const TableRow> rows);
/// Throws MalformedRow with the offending line.
std::vector<TableRow> read_table_csv(std::string_view text);

/// Missing power or energy leave the corresponding fields at zero.
MetricInputs inputs_from_row(const TableRow& row);

struct Indices {
  double si = 0;
  std::optional<double> mpi;  // needs power
  std::optional<double> rer;  // needs energy

  friend bool operator==(const Indices&, const Indices&) = default;
};

Indices indices_from_row(const TableRow& row);

struct ConsistencyTolerances {
  double inference_count = 0.02;
  double flops_per_inference = 0.05;
};

struct RowConsistency {
  std::optional<double> implied_n_power;  // power_kw * 1000 / power_per_inference_w
  double implied_n_time = 0;              // time_s / time_per_inference_s
  std::optional<double> count_rel_diff;
  double flops_per_inference = 0;         // flops * time_per_inference_s
  double flops_rel_dev = 0;               // from the median over all rows
  bool count_ok = true;
  bool flops_ok = true;
};

struct ConsistencyReport {
  std::vector<RowConsistency> rows;
  double median_flops_per_inference = 0;
  bool ok = true;
};

/// Implied inference counts must agree per row, and FLOPS x time per
/// inference must be the same across rows. Count checks are skipped for
/// rows without power columns.
ConsistencyReport check_consistency(std::span<const TableRow> rows, const ConsistencyTolerances& tol = {});

double relative_difference(double a, double b);

/// Attribute names used for normalized plot vectors, in vector order.
const std::vector<std::string>& plot_attributes();
std::vector<double> attribute_vector(const TableRow& row);

/// JSON text: attribute names, row labels, normalized vectors and SI/MPI/RER
/// bar series. Throws TooFewRows for fewer than two rows.
std::string plot_data_json(std::span<const TableRow> rows, std::span<const std::string> labels);

}  // namespace edgemark
