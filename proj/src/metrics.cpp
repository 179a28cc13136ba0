#include "edgemark/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "edgemark/error.hpp"

namespace edgemark {

QualityScores quality(std::span<const InferenceRecord> records, const Dataset& truth) {
  if (records.empty()) throw Error(ErrorCode::EmptyRecords, "no inference records");
  const std::size_t k = truth.label_set.size();
  std::vector<std::size_t> tp(k, 0), fp(k, 0), fn(k, 0), seen_truth(k, 0), seen_pred(k, 0);
  std::unordered_set<std::string> seen_ids;

  QualityScores q;
  for (const auto& r : records) {
    if (!seen_ids.insert(r.sample_id).second)
      throw Error(ErrorCode::IdMismatch, "duplicate record for '" + r.sample_id + "'");
    const LabeledSample* s = truth.find(r.sample_id);
    if (!s) throw Error(ErrorCode::IdMismatch, "'" + r.sample_id + "' is not in the dataset");
    auto t = truth.label_index(s->label.name);
    auto p = truth.label_index(r.predicted_label.name);
    if (!t || !p)
      throw Error(ErrorCode::IdMismatch, "label outside the dataset label set for '" + r.sample_id + "'");
    ++seen_truth[*t];
    ++seen_pred[*p];
    if (*t == *p) {
      ++tp[*t];
      ++q.n_correct;
    } else {
      ++fp[*p];
      ++fn[*t];
    }
  }
  q.n_total = records.size();
  q.accuracy = static_cast<double>(q.n_correct) / static_cast<double>(q.n_total);

  double f1_sum = 0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double tpc = static_cast<double>(tp[c]);
    const double precision = tp[c] + fp[c] ? tpc / static_cast<double>(tp[c] + fp[c]) : 0.0;
    const double recall = tp[c] + fn[c] ? tpc / static_cast<double>(tp[c] + fn[c]) : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    q.labels.push_back(truth.label_set[c].name);
    q.per_class_precision.push_back(precision);
    q.per_class_recall.push_back(recall);
    q.per_class_f1.push_back(f1);
    if (seen_truth[c] || seen_pred[c]) {
      f1_sum += f1;
      ++present;
    }
  }
  q.f_score_macro = present ? f1_sum / static_cast<double>(present) : 0.0;
  return q;
}

double flops_throughput(double flops_per_inference, double n_inferences, double total_time_s) {
  if (!(flops_per_inference > 0) || !(n_inferences > 0) || !(total_time_s > 0))
    throw Error(ErrorCode::Precondition, "flops_throughput needs positive inputs");
  return flops_per_inference * n_inferences / total_time_s;
}

double speed_index(const MetricInputs& in) {
  if (in.q_bits <= 0 || !(in.total_time_s > 0))
    throw Error(ErrorCode::Precondition, "speed index needs q_bits > 0 and total_time_s > 0");
  return in.flops_throughput / (static_cast<double>(in.q_bits) * in.total_time_s);
}

double model_performance_index(const MetricInputs& in) {
  if (!(in.power_tot_kw > 0)) throw Error(ErrorCode::ZeroPower, "total power must be positive");
  return (in.accuracy_avg + in.fscore_avg) / in.power_tot_kw;
}

double resource_efficiency_ratio(const MetricInputs& in) {
  if (!(in.cpu_pct_avg > 0) || !(in.mem_pct_avg > 0))
    throw Error(ErrorCode::ZeroUtilization, "CPU and memory utilization must be positive");
  return in.energy_tot_j / (in.cpu_pct_avg * in.mem_pct_avg);
}

std::vector<std::vector<double>> normalize_attributes(const std::vector<std::vector<double>>& rows) {
  if (rows.size() < 2) throw Error(ErrorCode::TooFewRows, "normalization needs at least two rows");
  const std::size_t width = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != width) throw Error(ErrorCode::Precondition, "rows differ in width");
    for (double v : r)
      if (!std::isfinite(v)) throw Error(ErrorCode::Precondition, "attribute values must be finite");
  }
  std::vector<std::vector<double>> out(rows.size(), std::vector<double>(width));
  for (std::size_t c = 0; c < width; ++c) {
    double lo = rows[0][c], hi = rows[0][c];
    for (const auto& r : rows) {
      lo = std::min(lo, r[c]);
      hi = std::max(hi, r[c]);
    }
    for (std::size_t i = 0; i < rows.size(); ++i)
      out[i][c] = hi == lo ? 1.0 : std::clamp((rows[i][c] - lo) / (hi - lo), 0.0, 1.0);
  }
  return out;
}

MeanStd mean_and_stddev(std::span<const double> values) {
  MeanStd r;
  double m2 = 0;
  for (double x : values) {
    ++r.n;
    const double delta = x - r.mean;
    r.mean += delta / static_cast<double>(r.n);
    m2 += delta * (x - r.mean);
  }
  if (r.n >= 2) r.stddev = std::sqrt(std::max(0.0, m2) / static_cast<double>(r.n - 1));
  return r;
}

}  // namespace edgemark
