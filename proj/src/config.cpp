#include "edgemark/config.hpp"

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "edgemark/csv.hpp"
#include "edgemark/error.hpp"

namespace edgemark {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      bad("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) bad("missing key '" + std::string(key) + "' in " + where);
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    bad("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  return obj.contains(key) ? get<T>(obj, key, where) : fallback;
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty()) return path;
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

LatencyModel latency_from_json(const json& j) {
  only_keys(j, "runner.latency", {"constant_s", "lognormal"});
  if (j.contains("constant_s")) return LatencyModel::constant(get<double>(j, "constant_s", "runner.latency"));
  if (j.contains("lognormal")) {
    const auto& ln = j["lognormal"];
    only_keys(ln, "runner.latency.lognormal", {"mu", "sigma"});
    return LatencyModel::log_normal(get<double>(ln, "mu", "lognormal"), get<double>(ln, "sigma", "lognormal"));
  }
  bad("runner.latency needs constant_s or lognormal");
}

ordered_json latency_to_json(const LatencyModel& m) {
  if (m.kind == LatencyModel::Kind::Constant) return ordered_json{{"constant_s", m.seconds}};
  return ordered_json{{"lognormal", {{"mu", m.mu}, {"sigma", m.sigma}}}};
}

RunnerConfig runner_from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) bad("runner must be an object");
  const auto kind = get<std::string>(j, "kind", "runner");
  if (kind == "simulator") {
    only_keys(j, "runner", {"kind", "seed", "confusion", "latency", "simulated_clock", "model", "q_bits",
                            "flops_per_inference"});
    SimulatorConfig s;
    s.profile.seed = get_or<std::uint64_t>(j, "seed", 0, "runner");
    if (j.contains("confusion")) {
      const auto& c = j["confusion"];
      if (c.is_string()) {
        if (c.get<std::string>() != "identity") bad("runner.confusion must be \"identity\" or a matrix");
      } else {
        s.profile.confusion = get<std::vector<std::vector<double>>>(j, "confusion", "runner");
      }
    }
    s.profile.latency = latency_from_json(j.contains("latency") ? j["latency"] : json::object({{"constant_s", 0.01}}));
    s.simulated_clock = get_or<bool>(j, "simulated_clock", true, "runner");
    s.model_path = get_or<std::string>(j, "model", "builtin:simulator", "runner");
    s.q_bits = get<int>(j, "q_bits", "runner");
    s.flops_per_inference = get<double>(j, "flops_per_inference", "runner");
    return s;
  }
  if (kind == "process") {
    only_keys(j, "runner", {"kind", "command", "args", "env", "model", "q_bits", "flops_per_inference",
                            "handshake_timeout_ms", "predict_timeout_ms", "shutdown_grace_ms"});
    RunnerSpec r;
    r.command = get<std::string>(j, "command", "runner");
    if (r.command.find('/') != std::string::npos) r.command = resolve(r.command, base_dir);
    r.args = get_or<std::vector<std::string>>(j, "args", {}, "runner");
    r.env = get_or<std::map<std::string, std::string>>(j, "env", {}, "runner");
    r.model_path = resolve(get_or<std::string>(j, "model", "", "runner"), base_dir);
    r.q_bits = get<int>(j, "q_bits", "runner");
    r.flops_per_inference = get<double>(j, "flops_per_inference", "runner");
    r.handshake_timeout = std::chrono::milliseconds(get_or<long>(j, "handshake_timeout_ms", 30'000, "runner"));
    r.predict_timeout = std::chrono::milliseconds(get_or<long>(j, "predict_timeout_ms", 120'000, "runner"));
    r.shutdown_grace = std::chrono::milliseconds(get_or<long>(j, "shutdown_grace_ms", 5'000, "runner"));
    return r;
  }
  bad("runner.kind must be \"simulator\" or \"process\"");
}

ordered_json runner_to_json(const RunnerConfig& rc) {
  if (const auto* s = std::get_if<SimulatorConfig>(&rc)) {
    ordered_json j{{"kind", "simulator"}, {"seed", s->profile.seed}};
    j["confusion"] = s->profile.confusion.empty() ? ordered_json("identity") : ordered_json(s->profile.confusion);
    j["latency"] = latency_to_json(s->profile.latency);
    j["simulated_clock"] = s->simulated_clock;
    j["model"] = s->model_path;
    j["q_bits"] = s->q_bits;
    j["flops_per_inference"] = s->flops_per_inference;
    return j;
  }
  const auto& r = std::get<RunnerSpec>(rc);
  return ordered_json{{"kind", "process"},
                      {"command", r.command},
                      {"args", r.args},
                      {"env", r.env},
                      {"model", r.model_path},
                      {"q_bits", r.q_bits},
                      {"flops_per_inference", r.flops_per_inference},
                      {"handshake_timeout_ms", r.handshake_timeout.count()},
                      {"predict_timeout_ms", r.predict_timeout.count()},
                      {"shutdown_grace_ms", r.shutdown_grace.count()}};
}

std::string host_name() {
  char buf[256] = {};
  if (::gethostname(buf, sizeof(buf) - 1) != 0) return "unknown";
  return buf;
}

}  // namespace

PowerSource parse_power_source(const std::string& text) {
  if (text == "none") return {};
  if (text.starts_with("replay:")) {
    PowerSource p{PowerSource::Kind::Replay, text.substr(7), 0};
    if (p.path.empty()) bad("replay power source needs a file");
    return p;
  }
  if (text.starts_with("serial:")) {
    auto rest = text.substr(7);
    auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0) bad("serial power source must be serial:<device>:<baud>");
    auto baud = csv::parse_int(rest.substr(colon + 1));
    if (!baud || *baud <= 0) bad("bad baud rate in '" + text + "'");
    return PowerSource{PowerSource::Kind::Serial, rest.substr(0, colon), static_cast<int>(*baud)};
  }
  bad("power source must be none, replay:<file> or serial:<device>:<baud>");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    auto part = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    auto v = csv::parse_int(part);
    if (!v || *v < 0) bad("bad seed '" + part + "'");
    seeds.push_back(static_cast<std::uint64_t>(*v));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return seeds;
}

int BenchmarkConfig::q_bits() const {
  return std::visit([](const auto& r) { return r.q_bits; }, runner);
}

double BenchmarkConfig::flops_per_inference() const {
  return std::visit([](const auto& r) { return r.flops_per_inference; }, runner);
}

bool BenchmarkConfig::simulated_clock() const {
  const auto* s = std::get_if<SimulatorConfig>(&runner);
  return s && s->simulated_clock;
}

void BenchmarkConfig::validate() const {
  if (dataset_path.empty()) bad("dataset path is empty");
  if (const auto* r = std::get_if<RunnerSpec>(&runner)) r->validate();
  if (!valid_q_bits(q_bits())) bad("q_bits must be 8, 16 or 32");
  if (!(flops_per_inference() > 0)) bad("flops_per_inference must be positive");
  if (telemetry_interval_ms <= 0) bad("telemetry interval must be positive");
  if (phase_window_ms < 0) bad("phase window must be nonnegative");
  if (simulated_clock() && !synthetic_load) bad("the simulated clock needs telemetry.synthetic");
  if (simulated_clock() && power.kind == PowerSource::Kind::Serial)
    bad("a serial power source cannot be used with the simulated clock");
  sensor.validate();
  if (seeds.empty()) bad("seeds must be nonempty");
  std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
  if (uniq.size() != seeds.size()) bad("seeds must be distinct");
  if (warmup < 0) bad("warmup must be nonnegative");
  if (device.core_count < 1) bad("device.core_count must be >= 1");
  if (synthetic_load) {
    for (double v : {synthetic_load->system_cpu_pct, synthetic_load->system_mem_pct,
                     synthetic_load->process_cpu_pct, synthetic_load->process_mem_pct})
      if (v < 0 || v > 100) bad("synthetic utilization must lie in [0, 100]");
  }
}

BenchmarkConfig config_from_json(const json& j, const std::string& base_dir) {
  only_keys(j, "config", {"dataset", "labels", "runner", "telemetry", "power", "sensor", "seeds", "warmup",
                          "device", "output_dir"});
  BenchmarkConfig c;
  c.dataset_path = resolve(get<std::string>(j, "dataset", "config"), base_dir);
  if (j.contains("labels")) c.labels = get<std::vector<std::string>>(j, "labels", "config");
  if (!j.contains("runner")) bad("missing key 'runner' in config");
  c.runner = runner_from_json(j["runner"], base_dir);

  if (j.contains("telemetry")) {
    const auto& t = j["telemetry"];
    only_keys(t, "telemetry", {"interval_ms", "phase_window_ms", "synthetic"});
    c.telemetry_interval_ms = get_or<int>(t, "interval_ms", 1000, "telemetry");
    c.phase_window_ms = get_or<int>(t, "phase_window_ms", 10'000, "telemetry");
    if (t.contains("synthetic")) {
      const auto& s = t["synthetic"];
      only_keys(s, "telemetry.synthetic", {"system_cpu_pct", "system_mem_pct", "process_cpu_pct", "process_mem_pct"});
      SyntheticLoad load;
      load.system_cpu_pct = get<double>(s, "system_cpu_pct", "telemetry.synthetic");
      load.system_mem_pct = get<double>(s, "system_mem_pct", "telemetry.synthetic");
      load.process_cpu_pct = get_or<double>(s, "process_cpu_pct", load.system_cpu_pct, "telemetry.synthetic");
      load.process_mem_pct = get_or<double>(s, "process_mem_pct", load.system_mem_pct, "telemetry.synthetic");
      c.synthetic_load = load;
    }
  }

  if (j.contains("power")) {
    const auto& p = j["power"];
    if (p.is_string()) {
      c.power = parse_power_source(p.get<std::string>());
    } else {
      only_keys(p, "power", {"kind", "path", "baud"});
      auto kind = get<std::string>(p, "kind", "power");
      if (kind == "none") c.power = {};
      else if (kind == "replay") c.power = {PowerSource::Kind::Replay, get<std::string>(p, "path", "power"), 0};
      else if (kind == "serial")
        c.power = {PowerSource::Kind::Serial, get<std::string>(p, "path", "power"), get_or<int>(p, "baud", 9600, "power")};
      else bad("power.kind must be none, replay or serial");
    }
    if (c.power.kind == PowerSource::Kind::Replay) c.power.path = resolve(c.power.path, base_dir);
  }

  if (j.contains("sensor")) {
    const auto& s = j["sensor"];
    only_keys(s, "sensor", {"v_ref", "adc_resolution", "supply_voltage", "calibration"});
    c.sensor.v_ref = get_or<double>(s, "v_ref", 5.0, "sensor");
    c.sensor.adc_resolution = get_or<int>(s, "adc_resolution", 1024, "sensor");
    c.sensor.supply_voltage = get_or<double>(s, "supply_voltage", 5.0, "sensor");
    if (s.contains("calibration") && !s["calibration"].is_null()) {
      const auto& cal = s["calibration"];
      only_keys(cal, "sensor.calibration", {"offset_counts", "sensitivity_v_per_a"});
      c.sensor.calibration = Calibration{get<double>(cal, "offset_counts", "sensor.calibration"),
                                         get<double>(cal, "sensitivity_v_per_a", "sensor.calibration")};
    }
  }

  if (j.contains("seeds")) c.seeds = get<std::vector<std::uint64_t>>(j, "seeds", "config");
  c.warmup = get_or<int>(j, "warmup", 0, "config");

  c.device.name = host_name();
  c.device.core_count = std::max(1u, std::thread::hardware_concurrency());
  c.device.ram_bytes = static_cast<std::uint64_t>(::sysconf(_SC_PHYS_PAGES)) *
                       static_cast<std::uint64_t>(::sysconf(_SC_PAGESIZE));
  if (j.contains("device")) {
    const auto& d = j["device"];
    only_keys(d, "device", {"name", "core_count", "ram_bytes"});
    c.device.name = get_or<std::string>(d, "name", c.device.name, "device");
    c.device.core_count = get_or<unsigned>(d, "core_count", c.device.core_count, "device");
    c.device.ram_bytes = get_or<std::uint64_t>(d, "ram_bytes", c.device.ram_bytes, "device");
  }
  c.output_dir = resolve(get_or<std::string>(j, "output_dir", "edgemark-out", "config"), base_dir);
  c.validate();
  return c;
}

ordered_json config_to_json(const BenchmarkConfig& c) {
  ordered_json j;
  j["dataset"] = c.dataset_path;
  if (c.labels) j["labels"] = *c.labels;
  j["runner"] = runner_to_json(c.runner);
  ordered_json t{{"interval_ms", c.telemetry_interval_ms}, {"phase_window_ms", c.phase_window_ms}};
  if (c.synthetic_load)
    t["synthetic"] = {{"system_cpu_pct", c.synthetic_load->system_cpu_pct},
                      {"system_mem_pct", c.synthetic_load->system_mem_pct},
                      {"process_cpu_pct", c.synthetic_load->process_cpu_pct},
                      {"process_mem_pct", c.synthetic_load->process_mem_pct}};
  j["telemetry"] = t;
  switch (c.power.kind) {
    case PowerSource::Kind::None: j["power"] = {{"kind", "none"}}; break;
    case PowerSource::Kind::Replay: j["power"] = {{"kind", "replay"}, {"path", c.power.path}}; break;
    case PowerSource::Kind::Serial:
      j["power"] = {{"kind", "serial"}, {"path", c.power.path}, {"baud", c.power.baud}};
      break;
  }
  ordered_json s{{"v_ref", c.sensor.v_ref},
                 {"adc_resolution", c.sensor.adc_resolution},
                 {"supply_voltage", c.sensor.supply_voltage}};
  if (c.sensor.calibration)
    s["calibration"] = {{"offset_counts", c.sensor.calibration->offset_counts},
                        {"sensitivity_v_per_a", c.sensor.calibration->sensitivity_v_per_a}};
  j["sensor"] = s;
  j["seeds"] = c.seeds;
  j["warmup"] = c.warmup;
  j["device"] = {{"name", c.device.name}, {"core_count", c.device.core_count}, {"ram_bytes", c.device.ram_bytes}};
  j["output_dir"] = c.output_dir;
  return j;
}

BenchmarkConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    bad(path + ": " + e.what());
  }
  return config_from_json(j, fs::path(path).parent_path().string());
}

}  // namespace edgemark
