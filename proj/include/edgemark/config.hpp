#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "edgemark/power.hpp"
#include "edgemark/runner.hpp"
#include "edgemark/telemetry.hpp"

namespace edgemark {

/// Built-in simulator in place of an external runner.
struct SimulatorConfig {
  SimProfile profile;
  /// Advance a virtual clock by each drawn latency instead of sleeping.
  bool simulated_clock = true;
  std::string model_path = "builtin:simulator";
  int q_bits = 32;
  double flops_per_inference = 0;

  friend bool operator==(const SimulatorConfig&, const SimulatorConfig&) = default;
};

using RunnerConfig = std::variant<RunnerSpec, SimulatorConfig>;

struct PowerSource {
  enum class Kind { None, Serial, Replay };
  Kind kind = Kind::None;
  std::string path;
  int baud = 9600;

  friend bool operator==(const PowerSource&, const PowerSource&) = default;
};

/// `none`, `replay:<file>` or `serial:<device>:<baud>`. Throws InvalidConfig.
PowerSource parse_power_source(const std::string& text);

struct DeviceProfile {
  std::string name;
  unsigned core_count = 1;
  std::uint64_t ram_bytes = 0;

  friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

struct BenchmarkConfig {
  std::string dataset_path;
  std::optional<std::vector<std::string>> labels;
  RunnerConfig runner;
  int telemetry_interval_ms = 1000;
  /// Length of the system-only sampling windows before spawn and after exit.
  int phase_window_ms = 10'000;
  /// Required under the simulated clock.
  std::optional<SyntheticLoad> synthetic_load;
  PowerSource power;
  SensorConfig sensor;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  /// Predictions run before measurement starts; excluded from every metric.
  int warmup = 0;
  DeviceProfile device;
  std::string output_dir = "edgemark-out";

  int q_bits() const;
  double flops_per_inference() const;
  bool simulated_clock() const;

  /// Throws InvalidConfig.
  void validate() const;
};

/// Reads a JSON config. Relative paths are resolved against `base_dir`.
/// Throws InvalidConfig for unknown keys, wrong types or invariant failures.
BenchmarkConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = "");
nlohmann::ordered_json config_to_json(const BenchmarkConfig& config);
BenchmarkConfig load_config(const std::string& path);

/// Parses `a,b,c` into seeds.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace edgemark
