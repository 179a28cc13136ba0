#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgemark/clock.hpp"

namespace edgemark {

/// Hall-sensor zero-current offset and sensitivity.
struct Calibration {
  double offset_counts = 0;
  double sensitivity_v_per_a = 0.185;

  friend bool operator==(const Calibration&, const Calibration&) = default;
};

struct SensorConfig {
  double v_ref = 5.0;
  int adc_resolution = 1024;
  double supply_voltage = 5.0;
  /// nullopt selects the literal count-based formula.
  std::optional<Calibration> calibration;

  /// Throws Error{InvalidConfig} when an invariant does not hold.
  void validate() const;
  friend bool operator==(const SensorConfig&, const SensorConfig&) = default;
};

struct Frame {
  std::int64_t t_device_ms = 0;
  int adc_count = 0;
};

/// Parses `<t_device_ms>,<adc_count>` (decimal, unsigned, no padding; a
/// trailing CR is tolerated). Throws MalformedFrame or AdcOutOfRange.
Frame decode_frame(std::string_view line, const SensorConfig& cfg);

/// Current in amperes. Uncalibrated: count * v_ref / resolution.
/// Calibrated: (count - offset) * (v_ref / resolution) / sensitivity.
double adc_to_current(int adc_count, const SensorConfig& cfg);

struct PowerSample {
  double t_device_ms = 0;
  double t_mono_ms = 0;
  int adc_count = 0;
  double current_a = 0;
  double power_w = 0;

  friend bool operator==(const PowerSample&, const PowerSample&) = default;
};

struct PowerTrace {
  std::vector<PowerSample> samples;
  SensorConfig config;

  friend bool operator==(const PowerTrace&, const PowerTrace&) = default;
};

PowerSample make_power_sample(const Frame& frame, double t_mono_ms, const SensorConfig& cfg);

/// Time window on the harness clock, milliseconds.
struct Window {
  double start_ms = 0;
  double end_ms = 0;
};

/// Trapezoidal integral of power over the window (joules); boundary values
/// are linearly interpolated. Throws TooFewSamples (trace has < 2 samples)
/// or WindowOutsideTrace.
double integrate_energy(const PowerTrace& trace, Window window);

struct PowerAggregates {
  double power_tot_kw = 0;           // sum of per-inference mean power / 1000
  double power_per_inference_w = 0;  // mean of per-inference mean power
  double mean_power_w = 0;           // time-weighted over the whole span
  double energy_tot_j = 0;
};

/// Per-inference power is the mean power over that inference's window. The
/// whole span defaults to [first window start, last window end].
PowerAggregates power_aggregates(const PowerTrace& trace, std::span<const Window> inference_windows,
                                 std::optional<Window> span = std::nullopt);

// Converted trace export: `t_device_ms,t_mono_ms,adc_count,current_a,power_w`.
void write_power_csv(std::ostream& out, const PowerTrace& trace);
PowerTrace read_power_csv(std::string_view text, const SensorConfig& cfg);

/// Decodes a replay file (one frame per line). The first frame is mapped to
/// `capture_start_us` on the harness clock. Malformed lines are errors
/// carrying their line number.
PowerTrace load_replay(std::string_view text, const SensorConfig& cfg, std::int64_t capture_start_us);

/// Reads frames from a serial device on a background thread. Clock offset is
/// estimated from the first well-formed frame received after start().
class SerialCapture {
 public:
  SerialCapture(std::string device, int baud, SensorConfig cfg, std::shared_ptr<Clock> clock);
  ~SerialCapture();
  SerialCapture(const SerialCapture&) = delete;
  SerialCapture& operator=(const SerialCapture&) = delete;

  /// Opens and configures the device. Throws IoError.
  void start();
  PowerTrace stop();
  std::size_t malformed_frames() const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

}  // namespace edgemark
