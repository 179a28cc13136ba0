#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edgemark/dataset.hpp"
#include "edgemark/runner.hpp"

namespace edgemark {

/// Everything the three composite indices consume.
struct MetricInputs {
  double flops_throughput = 0;  // operations per second
  int q_bits = 32;
  double total_time_s = 0;
  double accuracy_avg = 0;
  double fscore_avg = 0;
  double power_tot_kw = 0;  // sum of per-inference power, kW
  double energy_tot_j = 0;
  double cpu_pct_avg = 0;
  double mem_pct_avg = 0;

  friend bool operator==(const MetricInputs&, const MetricInputs&) = default;
};

struct QualityScores {
  double accuracy = 0;
  double f_score_macro = 0;
  std::vector<std::string> labels;  // order of the per-class vectors
  std::vector<double> per_class_precision;
  std::vector<double> per_class_recall;
  std::vector<double> per_class_f1;
  std::size_t n_correct = 0;
  std::size_t n_total = 0;

  friend bool operator==(const QualityScores&, const QualityScores&) = default;
};

/// Accuracy and macro-F1. Classes that appear in neither truth nor
/// predictions are left out of the macro mean. Throws EmptyRecords or
/// IdMismatch (unknown or duplicated sample id).
QualityScores quality(std::span<const InferenceRecord> records, const Dataset& truth);

double flops_throughput(double flops_per_inference, double n_inferences, double total_time_s);

/// FLOPS / (Q * t).
double speed_index(const MetricInputs& in);
/// (accuracy + F-score) / power in kW. Throws ZeroPower.
double model_performance_index(const MetricInputs& in);
/// energy (J) / (CPU% * MEM%). Throws ZeroUtilization.
double resource_efficiency_ratio(const MetricInputs& in);

/// Per-column min-max scaling to [0, 1]; constant columns become 1.0.
/// Throws TooFewRows for fewer than two rows.
std::vector<std::vector<double>> normalize_attributes(const std::vector<std::vector<double>>& rows);

struct MeanStd {
  double mean = 0;
  double stddev = 0;  // sample standard deviation, 0 for n < 2
  std::size_t n = 0;

  friend bool operator==(const MeanStd&, const MeanStd&) = default;
};

/// Welford accumulation; a constant sequence returns that constant exactly.
MeanStd mean_and_stddev(std::span<const double> values);

}  // namespace edgemark
