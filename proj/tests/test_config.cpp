#include <doctest.h>

#include "edgemark/config.hpp"
#include "edgemark/error.hpp"
#include "support.hpp"

using namespace edgemark;
using nlohmann::json;

namespace {

json simulated() {
  return json::parse(R"({
    "dataset": "data/d.csv",
    "runner": {"kind": "simulator", "seed": 3, "latency": {"constant_s": 1.06},
               "q_bits": 8, "flops_per_inference": 3.6e8},
    "telemetry": {"interval_ms": 250, "phase_window_ms": 1000,
                  "synthetic": {"system_cpu_pct": 40, "system_mem_pct": 30}},
    "seeds": [0, 1],
    "device": {"name": "bench", "core_count": 4, "ram_bytes": 1073741824}
  })");
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Precondition;
}

bool rejected(json j) { return code_of([&] { config_from_json(j, "/base"); }) == ErrorCode::InvalidConfig; }

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("simulator config with defaults") {
    const auto c = config_from_json(simulated(), "/base");
    CHECK(c.dataset_path == "/base/data/d.csv");
    CHECK(c.q_bits() == 8);
    CHECK(c.flops_per_inference() == 3.6e8);
    CHECK(c.simulated_clock());
    const auto& sim = std::get<SimulatorConfig>(c.runner);
    CHECK(sim.profile.seed == 3);
    CHECK(sim.profile.confusion.empty());
    CHECK(sim.profile.latency == LatencyModel::constant(1.06));
    CHECK(c.synthetic_load->process_cpu_pct == 40);
    CHECK(c.seeds == std::vector<std::uint64_t>{0, 1});
    CHECK(c.device.core_count == 4);
    CHECK(c.power.kind == PowerSource::Kind::None);
    CHECK(c.warmup == 0);
    CHECK(c.output_dir == "/base/edgemark-out");
  }

  TEST_CASE("default seeds") {
    auto j = simulated();
    j.erase("seeds");
    CHECK(config_from_json(j).seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
  }

  TEST_CASE("snapshot round trip") {
    auto j = simulated();
    j["power"] = "replay:trace.txt";
    j["sensor"] = {{"supply_voltage", 3.3}, {"calibration", {{"offset_counts", 512}, {"sensitivity_v_per_a", 0.185}}}};
    j["runner"]["confusion"] = {{0.9, 0.1, 0}, {0, 1, 0}, {0, 0, 1}};
    j["runner"]["latency"] = {{"lognormal", {{"mu", -2}, {"sigma", 0.3}}}};
    const auto c = config_from_json(j, "/base");
    CHECK(c.power.path == "/base/trace.txt");
    const auto again = config_from_json(json::parse(config_to_json(c).dump()));
    CHECK(config_to_json(again) == config_to_json(c));
  }

  TEST_CASE("process runner") {
    auto j = simulated();
    j["runner"] = {{"kind", "process"}, {"command", "./runners/tfl.py"}, {"args", {"-v"}}, {"model", "m.tflite"},
                   {"q_bits", 16}, {"flops_per_inference", 1e6}, {"predict_timeout_ms", 500}};
    j["telemetry"].erase("synthetic");
    const auto c = config_from_json(j, "/base");
    const auto& r = std::get<RunnerSpec>(c.runner);
    CHECK(r.command == "/base/runners/tfl.py");
    CHECK(r.model_path == "/base/m.tflite");
    CHECK(r.predict_timeout == std::chrono::milliseconds(500));
    CHECK_FALSE(c.simulated_clock());

    j["runner"]["command"] = "python3";
    CHECK(std::get<RunnerSpec>(config_from_json(j, "/base").runner).command == "python3");
  }

  TEST_CASE("rejections") {
    auto j = simulated();
    j["surprise"] = 1;
    CHECK(rejected(j));

    j = simulated();
    j["runner"]["q_bits"] = 4;
    CHECK(rejected(j));

    j = simulated();
    j["runner"]["flops_per_inference"] = 0;
    CHECK(rejected(j));

    j = simulated();
    j["runner"]["q_bits"] = "8";
    CHECK(rejected(j));

    j = simulated();
    j["telemetry"].erase("synthetic");
    CHECK(rejected(j));

    j = simulated();
    j["power"] = "serial:/dev/ttyUSB0:9600";
    CHECK(rejected(j));

    j = simulated();
    j["seeds"] = {1, 1};
    CHECK(rejected(j));

    j = simulated();
    j["seeds"] = json::array();
    CHECK(rejected(j));

    j = simulated();
    j["telemetry"]["interval_ms"] = 0;
    CHECK(rejected(j));

    j = simulated();
    j["telemetry"]["synthetic"]["system_cpu_pct"] = 140;
    CHECK(rejected(j));

    j = simulated();
    j["runner"]["kind"] = "remote";
    CHECK(rejected(j));

    j = simulated();
    j["sensor"] = {{"adc_resolution", 1000}};
    CHECK(rejected(j));

    j = simulated();
    j.erase("runner");
    CHECK(rejected(j));
  }

  TEST_CASE("power source strings") {
    CHECK(parse_power_source("none").kind == PowerSource::Kind::None);
    const auto r = parse_power_source("replay:/tmp/x.txt");
    CHECK(r.kind == PowerSource::Kind::Replay);
    CHECK(r.path == "/tmp/x.txt");
    const auto s = parse_power_source("serial:/dev/ttyACM0:115200");
    CHECK(s == PowerSource{PowerSource::Kind::Serial, "/dev/ttyACM0", 115200});
    for (const char* bad : {"", "replay:", "serial:/dev/x", "serial:/dev/x:fast", "usb:/dev/x"})
      CHECK_MESSAGE(code_of([&] { parse_power_source(bad); }) == ErrorCode::InvalidConfig, bad);
  }

  TEST_CASE("seed lists") {
    CHECK(parse_seed_list("7") == std::vector<std::uint64_t>{7});
    CHECK(parse_seed_list("0,1,2") == std::vector<std::uint64_t>{0, 1, 2});
    CHECK(code_of([] { parse_seed_list("1,,2"); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([] { parse_seed_list("-1"); }) == ErrorCode::InvalidConfig);
  }

  TEST_CASE("load from file resolves relative paths") {
    testing::TempDir dir;
    const auto path = dir.write("bench.json", simulated().dump());
    const auto c = load_config(path);
    CHECK(c.dataset_path == dir.file("data/d.csv"));
    dir.write("broken.json", "{ not json");
    CHECK(code_of([&] { load_config(dir.file("broken.json")); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([&] { load_config(dir.file("absent.json")); }) == ErrorCode::InvalidConfig);
  }
}
