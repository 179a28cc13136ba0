#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "edgemark/clock.hpp"
#include "edgemark/dataset.hpp"
#include "edgemark/protocol.hpp"

namespace edgemark {

/// An external inference process speaking the line protocol.
struct RunnerSpec {
  std::string command;
  std::vector<std::string> args;
  std::map<std::string, std::string> env;
  std::string model_path;
  int q_bits = 32;
  double flops_per_inference = 0;
  std::chrono::milliseconds handshake_timeout{30'000};
  std::chrono::milliseconds predict_timeout{120'000};
  std::chrono::milliseconds shutdown_grace{5'000};

  /// q_bits in {8, 16, 32}, flops_per_inference > 0, command nonempty.
  void validate() const;
};

bool valid_q_bits(int q_bits);

struct InferenceRecord {
  std::string sample_id;
  ClassLabel predicted_label;
  double latency_s = 0;
  double t_start_ms = 0;
  double t_end_ms = 0;
  /// What the runner claimed; metadata only, never used by metrics.
  std::optional<double> runner_latency_s;

  friend bool operator==(const InferenceRecord&, const InferenceRecord&) = default;
};

struct ExitStatus {
  enum class Kind { Exited, Signaled, Killed };
  Kind kind = Kind::Exited;
  int code = 0;  // exit code or signal number

  friend bool operator==(const ExitStatus&, const ExitStatus&) = default;
};

std::string to_string(const ExitStatus& status);

/// Lock-step protocol session. predict() blocks until the matching response
/// arrives, so at most one request is ever outstanding.
class RunnerSession {
 public:
  virtual ~RunnerSession() = default;

  virtual int pid() const = 0;
  const std::string& runner_name() const { return runner_name_; }
  const std::vector<ClassLabel>& labels() const { return labels_; }

  /// Latency is measured on the harness clock around the full round trip.
  /// Throws RunnerCrashed, PredictTimeout, UnknownLabelReturned, RunnerError
  /// or ProtocolViolation; after any of these the session is unusable.
  InferenceRecord predict(const LabeledSample& sample);

  /// Sends shutdown and reaps the runner. Idempotent; never throws.
  virtual ExitStatus shutdown() = 0;

 protected:
  RunnerSession(std::vector<ClassLabel> labels, std::shared_ptr<Clock> clock)
      : labels_(std::move(labels)), clock_(std::move(clock)) {}

  /// Sends one request line and returns the decoded response.
  virtual protocol::Message exchange(const std::string& request) = 0;

  std::string runner_name_;
  std::vector<ClassLabel> labels_;
  std::shared_ptr<Clock> clock_;
  bool broken_ = false;
};

/// Starts the process, sends init and waits for ready. Throws SpawnFailed,
/// HandshakeTimeout or ProtocolViolation.
std::unique_ptr<RunnerSession> spawn_runner(const RunnerSpec& spec,
                                            const std::vector<ClassLabel>& labels,
                                            std::shared_ptr<Clock> clock = nullptr);

// ---------------------------------------------------------------------------
// Built-in simulator.

struct LatencyModel {
  enum class Kind { Constant, LogNormal };
  Kind kind = Kind::Constant;
  double seconds = 0.01;  // Constant
  double mu = 0;          // LogNormal, of ln(seconds)
  double sigma = 0;

  static LatencyModel constant(double s) { return {Kind::Constant, s, 0, 0}; }
  static LatencyModel log_normal(double mu, double sigma) { return {Kind::LogNormal, 0, mu, sigma}; }
  friend bool operator==(const LatencyModel&, const LatencyModel&) = default;
};

struct SimProfile {
  std::uint64_t seed = 0;
  /// Row-stochastic: confusion[truth][predicted].
  std::vector<std::vector<double>> confusion;
  LatencyModel latency;

  /// Throws InvalidConfig unless the matrix is n_labels x n_labels with
  /// nonnegative rows summing to 1 within 1e-9 and the latency model is sane.
  void validate(std::size_t n_labels) const;
  static SimProfile identity(std::size_t n_labels, LatencyModel latency, std::uint64_t seed = 0);
  friend bool operator==(const SimProfile&, const SimProfile&) = default;
};

struct SimDraw {
  std::size_t label_index = 0;
  /// Quantized to whole microseconds and at least 1 us.
  double latency_s = 0;
  std::int64_t latency_us = 0;
};

/// Deterministic in (seed, draw_index, truth): counter-based hashing, no state.
SimDraw sim_predict(const SimProfile& profile, std::size_t truth_index, std::uint64_t draw_index);

/// Uniform in [0, 1) from a keyed counter.
double counter_uniform(std::uint64_t seed, std::uint64_t counter, std::uint64_t stream);

/// Combines a profile seed with a benchmark seed.
std::uint64_t mix_seed(std::uint64_t profile_seed, std::uint64_t run_seed);

/// Protocol endpoint shared by the in-process session and `edgemark
/// sim-runner`. It needs ground truth by sample id since predict messages
/// only carry text. Advances (simulated) or sleeps (real) the clock by each
/// drawn latency.
class SimulatorServer {
 public:
  SimulatorServer(SimProfile profile, std::unordered_map<std::string, std::string> truth,
                  std::shared_ptr<Clock> clock);

  /// Response line for one request line; nullopt after shutdown.
  std::optional<std::string> handle(std::string_view line);
  bool finished() const { return finished_; }

 private:
  SimProfile profile_;
  std::unordered_map<std::string, std::string> truth_;
  std::shared_ptr<Clock> clock_;
  std::vector<std::string> labels_;
  bool initialized_ = false;
  bool finished_ = false;
  std::uint64_t draws_ = 0;
};

struct SimulatorInit {
  std::string model_path = "builtin:simulator";
  int q_bits = 32;
};

/// In-process session. pid() is the harness pid.
std::unique_ptr<RunnerSession> spawn_simulator(const SimProfile& profile, const Dataset& dataset,
                                               std::shared_ptr<Clock> clock,
                                               const SimulatorInit& init = {});

}  // namespace edgemark
