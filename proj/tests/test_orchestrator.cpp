#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "edgemark/csv.hpp"
#include "edgemark/error.hpp"
#include "edgemark/orchestrator.hpp"
#include "support.hpp"

using namespace edgemark;
using nlohmann::json;

namespace {

/// Simulator config with constant latency and a fixed synthetic load.
json sim_config(const std::string& dataset, double latency_s, std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4}) {
  return json{{"dataset", dataset},
              {"runner",
               {{"kind", "simulator"},
                {"seed", 11},
                {"latency", {{"constant_s", latency_s}}},
                {"q_bits", 8},
                {"flops_per_inference", 3.6e8}}},
              {"telemetry",
               {{"interval_ms", 1000},
                {"phase_window_ms", 2000},
                {"synthetic", {{"system_cpu_pct", 40}, {"system_mem_pct", 25}, {"process_cpu_pct", 30}}}}},
              {"seeds", seeds},
              {"device", {{"name", "sim-board"}, {"core_count", 4}, {"ram_bytes", 1 << 30}}}};
}

/// Frames every 100 ms; 512 counts at 29.96 V supply is 2.5 A * 29.96 V = 74.9 W.
std::string flat_trace(double seconds) {
  std::string s;
  for (long t = 0; t <= static_cast<long>(seconds * 1000); t += 100) s += std::to_string(t) + ",512\n";
  return s;
}

/// Dataset whose ids carry the truth label for the `truth` fake runner.
std::string tagged_csv(int n) {
  static const char* labels[] = {"positive", "neutral", "negative"};
  std::string s = "# labels: positive,neutral,negative\nid,text,label\n";
  for (int i = 0; i < n; ++i) {
    const std::string l = labels[i % 3];
    s += "s" + std::to_string(i) + "@" + l + ",text " + std::to_string(i) + "," + l + "\n";
  }
  return s;
}

}  // namespace

TEST_SUITE("orchestrator") {
  TEST_CASE("identity simulator over five seeds") {
    testing::TempDir dir;
    const auto ds = dir.write("d.csv", testing::polarity_csv(100));
    const auto report = run_benchmark(config_from_json(sim_config(ds, 0.05)));

    CHECK_FALSE(report.failed);
    CHECK_FALSE(report.partial);
    CHECK(report.invariant_violations.empty());
    REQUIRE(report.seeds.size() == 5);
    std::size_t records = 0;
    for (const auto& s : report.seeds) {
      CHECK(s.completed);
      CHECK(s.quality->accuracy == 1.0);
      CHECK(s.quality->f_score_macro == 1.0);
      CHECK(s.runner_name == "edgemark-sim");
      records += s.records.size();
    }
    CHECK(records == 500);
    CHECK(report.accuracy->mean == 1.0);
    CHECK(report.accuracy->stddev == 0.0);
    CHECK(report.table_row->avg_accuracy == 1.0);
    CHECK(report.table_row->avg_cpu_pct == 40);
    CHECK(report.table_row->avg_mem_pct == 25);
    CHECK(report.environment.clock_source == "simulated");
    CHECK(report.dataset_size == 100);
    CHECK(report.config_hash.size() == 16);
  }

  TEST_CASE("constant latency gives exact timing") {
    testing::TempDir dir;
    const auto ds = dir.write("d.csv", testing::polarity_csv(1000));
    const auto report = run_benchmark(config_from_json(sim_config(ds, 1.06, {0})));
    const auto& row = *report.table_row;
    CHECK(row.time_s == 1060.0);
    CHECK(row.time_per_inference_s == 1.06);
    CHECK(row.flops == doctest::Approx(3.6e8 / 1.06).epsilon(1e-15));
    CHECK(report.indices->si == doctest::Approx(3.6e8 * 1000 / 1060 / (8 * 1060.0)).epsilon(1e-15));
    CHECK_FALSE(report.indices->mpi.has_value());
  }

  TEST_CASE("simulated runs are reproducible") {
    testing::TempDir dir;
    const auto ds = dir.write("d.csv", testing::polarity_csv(60));
    auto j = sim_config(ds, 0, {3, 9});
    j["runner"]["latency"] = {{"lognormal", {{"mu", -2.5}, {"sigma", 0.4}}}};
    j["runner"]["confusion"] = {{0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}, {0.2, 0.2, 0.6}};
    j["warmup"] = 5;
    const auto config = config_from_json(j);
    const auto a = run_benchmark(config);
    const auto b = run_benchmark(config);
    CHECK(report_to_string(a) == report_to_string(b));
    CHECK(a.seeds[0].records != a.seeds[1].records);
    CHECK(a.seeds[0].quality->accuracy < 1.0);
  }

  TEST_CASE("replayed 74.9 W trace") {
    testing::TempDir dir;
    const auto ds = dir.write("d.csv", testing::polarity_csv(1000));
    auto j = sim_config(ds, 1.06, {0, 1});
    j["power"] = "replay:" + dir.write("trace.txt", flat_trace(1070));
    j["sensor"] = {{"supply_voltage", 29.96}};
    const auto report = run_benchmark(config_from_json(j));
    REQUIRE_FALSE(report.failed);
    CHECK(report.invariant_violations.empty());
    const auto& row = *report.table_row;
    CHECK(*row.power_per_inference_w == doctest::Approx(74.9).epsilon(1e-12));
    CHECK(*row.power_kw == doctest::Approx(74.9).epsilon(1e-12));
    CHECK(*row.energy_j == doctest::Approx(74.9 * 1060).epsilon(1e-12));
    CHECK(*report.indices->mpi == doctest::Approx(2.0 / 74.9).epsilon(1e-12));
    CHECK(*report.indices->rer == doctest::Approx(74.9 * 1060 / (40.0 * 25.0)).epsilon(1e-12));
  }

  TEST_CASE("a short replay trace fails the seed") {
    testing::TempDir dir;
    const auto ds = dir.write("d.csv", testing::polarity_csv(30));
    auto j = sim_config(ds, 1.0, {0, 1});
    j["power"] = "replay:" + dir.write("trace.txt", flat_trace(5));
    j["sensor"] = {{"supply_voltage", 29.96}};
    const auto report = run_benchmark(config_from_json(j));
    CHECK(report.failed);
    CHECK(report.seeds.size() == 1);
    CHECK(report.failure.find("seed 0") == 0);
    CHECK_FALSE(report.table_row.has_value());
  }

  TEST_CASE("runner crash in the second seed gives a partial report") {
    testing::TempDir dir;
    const auto ds = dir.write("d.csv", tagged_csv(20));
    const auto script = dir.write("runner.sh", "#!/bin/sh\nif [ \"$EDGEMARK_SEED\" = 1 ]; then mode=crash; else mode=truth; fi\n"
                                              "exec " + testing::quote(FAKE_RUNNER) + " --mode $mode --after 4\n");
    std::filesystem::permissions(script, std::filesystem::perms::owner_all);
    json j{{"dataset", ds},
           {"runner", {{"kind", "process"}, {"command", script}, {"q_bits", 16}, {"flops_per_inference", 1e6},
                       {"handshake_timeout_ms", 5000}, {"shutdown_grace_ms", 500}}},
           {"telemetry", {{"interval_ms", 20}, {"phase_window_ms", 60}}},
           {"seeds", {0, 1, 2}}};
    std::vector<std::string> log;
    const auto report = run_benchmark(config_from_json(j), RunOptions{nullptr, [&](const std::string& l) { log.push_back(l); }});
    CHECK(report.partial);
    CHECK_FALSE(report.failed);
    REQUIRE(report.seeds.size() == 2);
    CHECK(report.seeds[0].completed);
    CHECK(report.seeds[0].quality->accuracy == 1.0);
    CHECK_FALSE(report.seeds[1].completed);
    CHECK(report.seeds[1].error.starts_with("RunnerCrashed: during: "));
    CHECK(report.seeds[1].records.size() == 4);
    CHECK(report.seeds[1].runner_exit == ExitStatus{ExitStatus::Kind::Exited, 7});
    CHECK(report.table_row->q_bits == 16);
    CHECK(report.environment.clock_source == "steady_clock");
    CHECK_FALSE(log.empty());

    const auto& t = report.seeds[0].telemetry;
    CHECK(t.target_pid == report.seeds[0].runner_pid);
    CHECK_NOTHROW(aggregate(t, Phase::During, ScopeKind::Process));
    CHECK(trace_is_well_formed(t));
  }

  TEST_CASE("report JSON round trip") {
    testing::TempDir dir;
    const auto ds = dir.write("d.csv", testing::polarity_csv(40));
    auto j = sim_config(ds, 0.2, {0, 1});
    j["power"] = "replay:" + dir.write("trace.txt", flat_trace(20));
    j["sensor"] = {{"supply_voltage", 29.96}, {"calibration", {{"offset_counts", 0}, {"sensitivity_v_per_a", 1}}}};
    const auto report = run_benchmark(config_from_json(j));
    REQUIRE_FALSE(report.failed);
    const auto again = report_from_json(nlohmann::ordered_json::parse(report_to_string(report)));
    CHECK(again == report);

    auto broken = nlohmann::ordered_json::parse(report_to_string(report));
    broken["seeds"][0]["records"][3].erase("sample_id");
    try {
      report_from_json(broken);
      FAIL("schema error accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedRow);
      CHECK(std::string(e.what()).find("$.seeds[0].records[3]") != std::string::npos);
    }
  }

  TEST_CASE("persisted artifacts and output directory override") {
    testing::TempDir dir;
    const auto ds = dir.write("d.csv", testing::polarity_csv(30));
    const auto config = config_from_json(sim_config(ds, 0.1, {0, 1}));
    const auto report = run_benchmark(config);

    CHECK(resolve_output_dir(config) == config.output_dir);
    ::setenv("EDGEMARK_OUTPUT_DIR", dir.file("override").c_str(), 1);
    const auto out = resolve_output_dir(config);
    ::unsetenv("EDGEMARK_OUTPUT_DIR");
    CHECK(out == dir.file("override"));

    const auto paths = persist_report(report, out);
    for (const char* name : {"report.json", "table_row.csv", "plotdata.json", "records_seed0.csv",
                             "telemetry_seed1.csv"})
      CHECK_MESSAGE(std::filesystem::exists(out + "/" + name), name);
    CHECK(load_report(out + "/report.json") == report);
    const auto rows = read_table_csv(testing::slurp(out + "/table_row.csv"));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0] == *report.table_row);
  }

  TEST_CASE("aggregate rows") {
    TableRow a{"d", 8, 2.0, 100, 20, 1, 1, 0.5, 0.4, 10, 20, 300.0};
    TableRow b{"d", 8, 4.0, 300, 40, 3, 1, 0.7, 0.6, 30, 40, std::nullopt};
    const std::vector<TableRow> rows{a, b};
    const auto m = aggregate_rows(rows, 100, 1e6);
    CHECK(m.time_s == 200);
    CHECK(m.time_per_inference_s == 2);
    CHECK(m.flops == 1e6 * 100 / 200);
    CHECK(*m.power_kw == 3.0);
    CHECK_FALSE(m.energy_j.has_value());
    CHECK(m.avg_accuracy == doctest::Approx(0.6));
    CHECK_THROWS_AS(aggregate_rows({}, 1, 1), Error);
  }

  TEST_CASE("comparison of published rows") {
    const auto rows = read_table_csv(testing::slurp(std::string(TEST_DATA_DIR) + "/published_results.csv"));
    std::vector<ComparisonEntry> entries;
    for (const auto& r : rows)
      entries.push_back({r.device + "/" + std::to_string(r.q_bits), "same", r, indices_from_row(r)});
    const auto table = compare(entries);
    auto best = [&](const std::string& attr) {
      const auto it = std::find(table.attributes.begin(), table.attributes.end(), attr);
      REQUIRE(it != table.attributes.end());
      return table.names[table.best_row[static_cast<std::size_t>(it - table.attributes.begin())]];
    };
    CHECK(best("si") == "RP4B/8");
    CHECK(best("time_s") == "RP4B/8");
    CHECK(best("power_kw") == "RP4B/8");
    CHECK(best("mpi") == "RP4B/8");
    CHECK(best("avg_accuracy").ends_with("/32"));

    entries[3].dataset_fingerprint = "other";
    try {
      compare(entries);
      FAIL("mismatched datasets accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DatasetMismatch);
    }
    CHECK_THROWS_AS(compare(std::span(entries).first(1)), Error);
  }

  TEST_CASE("identical reports compare equal") {
    testing::TempDir dir;
    const auto ds = dir.write("d.csv", testing::polarity_csv(20));
    const auto r = run_benchmark(config_from_json(sim_config(ds, 0.1, {0})));
    const std::vector<RunReport> reports{r, r};
    const auto table = compare(reports);
    for (const auto& vec : table.normalized)
      for (double v : vec) CHECK(v == 1.0);
    std::ostringstream out;
    write_comparison_csv(out, table);
    CHECK(out.str().starts_with("name,power_kw,"));
  }

  TEST_CASE("seed artifacts replay to the same row") {
    testing::TempDir dir;
    const auto ds = dir.write("d.csv", testing::polarity_csv(50));
    auto j = sim_config(ds, 0, {0, 1});
    j["runner"]["latency"] = {{"lognormal", {{"mu", -1}, {"sigma", 0.3}}}};
    j["power"] = "replay:" + dir.write("trace.txt", flat_trace(100));
    j["sensor"] = {{"supply_voltage", 29.96}};
    const auto report = run_benchmark(config_from_json(j));
    REQUIRE_FALSE(report.failed);
    const auto out = dir.file("out");
    persist_report(report, out);

    const auto cmd = std::string(EDGEMARK_CLI) + " replay --records " + testing::quote(out + "/records_seed1.csv") +
                     " --telemetry " + testing::quote(out + "/telemetry_seed1.csv") + " --power " +
                     testing::quote(out + "/power_seed1.csv") + " --dataset " + testing::quote(ds) +
                     " --q-bits 8 --flops-per-inference 3.6e8 --device sim-board --supply-voltage 29.96";
    const auto res = testing::run(cmd);
    REQUIRE(res.exit_code == 0);
    const auto table_text = res.out.substr(0, res.out.find("si="));
    const auto rows = read_table_csv(table_text);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0] == *report.seeds[1].row);
  }

  TEST_CASE("aggregate row replays through the metrics command") {
    testing::TempDir dir;
    const auto ds = dir.write("d.csv", testing::polarity_csv(50));
    auto j = sim_config(ds, 0, {0, 1, 2});
    j["runner"]["latency"] = {{"lognormal", {{"mu", -1}, {"sigma", 0.3}}}};
    j["power"] = "replay:" + dir.write("trace.txt", flat_trace(100));
    j["sensor"] = {{"supply_voltage", 29.96}};
    const auto report = run_benchmark(config_from_json(j));
    persist_report(report, dir.file("out"));
    const auto res = testing::run(std::string(EDGEMARK_CLI) + " metrics --table " +
                                  testing::quote(dir.file("out/table_row.csv")));
    REQUIRE(res.exit_code == 0);
    std::istringstream lines(res.out);
    std::string header, row;
    std::getline(lines, header);
    std::getline(lines, row);
    CHECK(header == "device,q_bits,si,mpi,rer");
    std::ostringstream want;
    want << "sim-board,8," << csv::format_double(report.indices->si) << "," << csv::format_double(*report.indices->mpi) << ","
         << csv::format_double(*report.indices->rer);
    CHECK(row == want.str());
  }

  TEST_CASE("config errors propagate") {
    testing::TempDir dir;
    auto j = sim_config(dir.file("missing.csv"), 0.1);
    CHECK_THROWS_AS(run_benchmark(config_from_json(j)), Error);
  }
}
