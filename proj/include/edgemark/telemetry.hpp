#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "edgemark/clock.hpp"

namespace edgemark {

enum class Phase { Pre, During, Post };
enum class ScopeKind { System, Process };

std::string_view to_string(Phase phase);
std::optional<Phase> parse_phase(std::string_view text);

struct Scope {
  ScopeKind kind = ScopeKind::System;
  int pid = 0;  // meaningful for Process only

  static Scope system() { return {}; }
  static Scope process(int pid) { return {ScopeKind::Process, pid}; }
  friend bool operator==(const Scope&, const Scope&) = default;
};

/// "system" or "process:<pid>".
std::string to_string(const Scope& scope);
std::optional<Scope> parse_scope(std::string_view text);

struct TelemetrySample {
  double t_mono_ms = 0;
  Scope scope;
  double cpu_pct = 0;  // of total machine capacity, all cores = 100
  double mem_pct = 0;  // of total physical memory
  Phase phase = Phase::Pre;

  friend bool operator==(const TelemetrySample&, const TelemetrySample&) = default;
};

struct TelemetryTrace {
  std::vector<TelemetrySample> samples;
  int interval_ms = 1000;
  int target_pid = 0;

  friend bool operator==(const TelemetryTrace&, const TelemetryTrace&) = default;
};

struct UtilizationSummary {
  double avg_cpu_pct = 0;
  double avg_mem_pct = 0;
  double peak_cpu_pct = 0;
  double peak_mem_pct = 0;
  std::size_t n_samples = 0;
};

/// Means and maxima over samples matching (phase, scope kind). Throws
/// Error{NoMatchingSamples}.
UtilizationSummary aggregate(const TelemetryTrace& trace, Phase phase, ScopeKind scope);

/// Appends `part` to `into` and keeps samples ordered by time.
void merge_into(TelemetryTrace& into, const TelemetryTrace& part);

/// True when samples are time-ordered, in range, and Pre < During < Post.
bool trace_is_well_formed(const TelemetryTrace& trace, std::string* why = nullptr);

// Export: header `t_mono_ms,scope,phase,cpu_pct,mem_pct`, one sample per line.
void write_trace_csv(std::ostream& out, const TelemetryTrace& trace);
TelemetryTrace read_trace_csv(std::string_view text);

// ---------------------------------------------------------------------------
// Raw counters and their conversion to percentages.

struct CpuTimes {
  std::uint64_t busy = 0;   // jiffies not idle/iowait, summed over all cores
  std::uint64_t total = 0;  // all jiffies, summed over all cores
};

struct ProcessCounters {
  std::uint64_t cpu_ticks = 0;  // utime + stime
  std::uint64_t rss_bytes = 0;
};

/// Busy fraction of all cores between two readings, in percent.
double system_cpu_pct(const CpuTimes& before, const CpuTimes& after);
/// Process CPU over `elapsed_s`, normalized so that N saturated cores of an
/// N-core machine read 100.
double process_cpu_pct(std::uint64_t tick_delta, double elapsed_s, double ticks_per_second,
                       unsigned core_count);

/// Source of raw resource counters. The default implementation reads procfs.
class ResourceProbe {
 public:
  virtual ~ResourceProbe() = default;
  virtual CpuTimes system_cpu() = 0;
  virtual double system_mem_pct() = 0;
  /// nullopt once the process no longer exists or is a zombie.
  virtual std::optional<ProcessCounters> process(int pid) = 0;
  virtual unsigned core_count() = 0;
  virtual double ticks_per_second() = 0;
  virtual std::uint64_t total_mem_bytes() = 0;
};

/// Reads `<root>/stat`, `<root>/meminfo` and `<root>/<pid>/stat`.
class ProcfsProbe final : public ResourceProbe {
 public:
  explicit ProcfsProbe(std::string root = "/proc");
  CpuTimes system_cpu() override;
  double system_mem_pct() override;
  std::optional<ProcessCounters> process(int pid) override;
  unsigned core_count() override;
  double ticks_per_second() override;
  std::uint64_t total_mem_bytes() override;

 private:
  std::string root_;
};

// ---------------------------------------------------------------------------
// Background sampling.

struct SamplerOptions {
  int interval_ms = 1000;
  Phase phase = Phase::During;
  /// Process scope is sampled only in the During phase.
  int target_pid = 0;
};

/// Samples on a background thread. The thread is the only writer of the
/// trace; the trace is handed out by stop().
class SamplerHandle {
 public:
  SamplerHandle(std::shared_ptr<ResourceProbe> probe, std::shared_ptr<Clock> clock,
                SamplerOptions options);
  ~SamplerHandle();
  SamplerHandle(SamplerHandle&&) noexcept;
  SamplerHandle& operator=(SamplerHandle&&) noexcept;

  /// Throws SamplerAlreadyRunning, or NoSuchProcess when the During target
  /// does not exist.
  void start();
  /// Throws AlreadyStopped on the second call.
  TelemetryTrace stop();
  bool running() const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

SamplerHandle start_sampler(int target_pid, int interval_ms, Phase phase,
                            std::shared_ptr<ResourceProbe> probe = nullptr,
                            std::shared_ptr<Clock> clock = nullptr);

/// Constant utilization used under the simulated clock, where no real work
/// happens and a live sampler would be meaningless.
struct SyntheticLoad {
  double system_cpu_pct = 0;
  double system_mem_pct = 0;
  double process_cpu_pct = 0;
  double process_mem_pct = 0;
};

/// Samples at start + k*interval for k >= 1 up to end, plus one at end if
/// none fell inside. Process samples are added when `pid` is set.
TelemetryTrace synthesize_trace(const SyntheticLoad& load, std::int64_t start_us,
                                std::int64_t end_us, int interval_ms, Phase phase,
                                std::optional<int> pid);

}  // namespace edgemark
