#include "edgemark/table.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>

#include "edgemark/csv.hpp"
#include "edgemark/error.hpp"

namespace edgemark {

const std::vector<std::string>& table_columns() {
  static const std::vector<std::string> cols{
      "device",       "q_bits",     "power_kw",    "time_s",      "power_per_inference_w",
      "time_per_inference_s", "flops", "avg_accuracy", "avg_fscore", "avg_cpu_pct",
      "avg_mem_pct",  "energy_j"};
  return cols;
}

std::string table_header() {
  std::string h;
  for (const auto& c : table_columns()) h += (h.empty() ? "" : ",") + c;
  return h;
}

void write_table_csv(std::ostream& out, std::span<const TableRow> rows) {
  out << table_header() << '\n';
  for (const auto& r : rows) {
    csv::write_row(out, {r.device, std::to_string(r.q_bits), csv::format_optional(r.power_kw),
                         csv::format_double(r.time_s), csv::format_optional(r.power_per_inference_w),
                         csv::format_double(r.time_per_inference_s), csv::format_double(r.flops),
                         csv::format_double(r.avg_accuracy), csv::format_double(r.avg_fscore),
                         csv::format_double(r.avg_cpu_pct), csv::format_double(r.avg_mem_pct),
                         csv::format_optional(r.energy_j)});
  }
}

std::vector<TableRow> read_table_csv(std::string_view text) {
  auto records = csv::parse(text);
  if (records.empty()) throw Error(ErrorCode::MalformedRow, "empty table", 1);
  auto header = records[0].fields;
  const auto& cols = table_columns();
  const bool full = header == cols;
  const bool without_energy = header == std::vector<std::string>(cols.begin(), cols.end() - 1);
  if (!full && !without_energy)
    throw Error(ErrorCode::MalformedRow, "table header must be " + table_header(), records[0].line);

  std::vector<TableRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.fields.size() != header.size())
      throw Error(ErrorCode::MalformedRow, "expected " + std::to_string(header.size()) + " fields", rec.line);
    auto req = [&](std::size_t k) {
      auto v = csv::parse_double(rec.fields[k]);
      if (!v) throw Error(ErrorCode::MalformedRow, "column " + cols[k] + " is not a number", rec.line);
      return *v;
    };
    auto opt = [&](std::size_t k) -> std::optional<double> {
      if (k >= rec.fields.size() || rec.fields[k].empty()) return std::nullopt;
      return req(k);
    };
    TableRow r;
    r.device = rec.fields[0];
    auto q = csv::parse_int(rec.fields[1]);
    if (!q) throw Error(ErrorCode::MalformedRow, "q_bits is not an integer", rec.line);
    r.q_bits = static_cast<int>(*q);
    r.power_kw = opt(2);
    r.time_s = req(3);
    r.power_per_inference_w = opt(4);
    r.time_per_inference_s = req(5);
    r.flops = req(6);
    r.avg_accuracy = req(7);
    r.avg_fscore = req(8);
    r.avg_cpu_pct = req(9);
    r.avg_mem_pct = req(10);
    r.energy_j = opt(11);
    rows.push_back(std::move(r));
  }
  return rows;
}

MetricInputs inputs_from_row(const TableRow& row) {
  MetricInputs in;
  in.flops_throughput = row.flops;
  in.q_bits = row.q_bits;
  in.total_time_s = row.time_s;
  in.accuracy_avg = row.avg_accuracy;
  in.fscore_avg = row.avg_fscore;
  in.power_tot_kw = row.power_kw.value_or(0.0);
  in.energy_tot_j = row.energy_j.value_or(0.0);
  in.cpu_pct_avg = row.avg_cpu_pct;
  in.mem_pct_avg = row.avg_mem_pct;
  return in;
}

Indices indices_from_row(const TableRow& row) {
  const MetricInputs in = inputs_from_row(row);
  Indices ix;
  ix.si = speed_index(in);
  if (row.power_kw && *row.power_kw > 0) ix.mpi = model_performance_index(in);
  if (row.energy_j && in.cpu_pct_avg > 0 && in.mem_pct_avg > 0) ix.rer = resource_efficiency_ratio(in);
  return ix;
}

double relative_difference(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0 ? 0.0 : std::abs(a - b) / scale;
}

ConsistencyReport check_consistency(std::span<const TableRow> rows, const ConsistencyTolerances& tol) {
  ConsistencyReport rep;
  std::vector<double> fpi;
  for (const auto& r : rows) {
    RowConsistency c;
    c.implied_n_time = r.time_s / r.time_per_inference_s;
    if (r.power_kw && r.power_per_inference_w && *r.power_per_inference_w > 0) {
      c.implied_n_power = *r.power_kw * 1000.0 / *r.power_per_inference_w;
      c.count_rel_diff = relative_difference(*c.implied_n_power, c.implied_n_time);
      c.count_ok = *c.count_rel_diff <= tol.inference_count;
    }
    c.flops_per_inference = r.flops * r.time_per_inference_s;
    fpi.push_back(c.flops_per_inference);
    rep.rows.push_back(c);
  }
  if (!fpi.empty()) {
    auto sorted = fpi;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    rep.median_flops_per_inference = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  }
  for (auto& c : rep.rows) {
    c.flops_rel_dev = relative_difference(c.flops_per_inference, rep.median_flops_per_inference);
    c.flops_ok = c.flops_rel_dev <= tol.flops_per_inference;
    rep.ok = rep.ok && c.count_ok && c.flops_ok;
  }
  return rep;
}

const std::vector<std::string>& plot_attributes() {
  static const std::vector<std::string> names{
      "power_kw", "time_s",       "power_per_inference_w", "time_per_inference_s", "flops",
      "avg_accuracy", "avg_fscore", "avg_cpu_pct",          "avg_mem_pct"};
  return names;
}

std::vector<double> attribute_vector(const TableRow& row) {
  return {row.power_kw.value_or(0.0), row.time_s, row.power_per_inference_w.value_or(0.0),
          row.time_per_inference_s, row.flops, row.avg_accuracy, row.avg_fscore, row.avg_cpu_pct,
          row.avg_mem_pct};
}

std::string plot_data_json(std::span<const TableRow> rows, std::span<const std::string> labels) {
  std::vector<std::vector<double>> raw;
  for (const auto& r : rows) raw.push_back(attribute_vector(r));
  const auto normalized = normalize_attributes(raw);

  nlohmann::ordered_json j;
  j["attributes"] = plot_attributes();
  j["rows"] = std::vector<std::string>(labels.begin(), labels.end());
  j["normalized"] = normalized;
  nlohmann::ordered_json si = nlohmann::ordered_json::array(), mpi = si, rer = si;
  for (const auto& r : rows) {
    const Indices ix = indices_from_row(r);
    si.push_back(ix.si);
    mpi.push_back(ix.mpi ? nlohmann::ordered_json(*ix.mpi) : nlohmann::ordered_json(nullptr));
    rer.push_back(ix.rer ? nlohmann::ordered_json(*ix.rer) : nlohmann::ordered_json(nullptr));
  }
  j["bars"] = {{"si", si}, {"mpi", mpi}, {"rer", rer}};
  return j.dump(2);
}

}  // namespace edgemark
