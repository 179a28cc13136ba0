#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace edgemark {

enum class ErrorCode {
  // dataset
  MissingFile,
  MalformedRow,
  UnknownLabel,
  EmptyDataset,
  // telemetry
  NoSuchProcess,
  SamplerAlreadyRunning,
  AlreadyStopped,
  NoMatchingSamples,
  // power
  MalformedFrame,
  AdcOutOfRange,
  WindowOutsideTrace,
  TooFewSamples,
  // runner
  SpawnFailed,
  HandshakeTimeout,
  ProtocolViolation,
  RunnerCrashed,
  PredictTimeout,
  UnknownLabelReturned,
  RunnerError,
  // metrics
  IdMismatch,
  EmptyRecords,
  ZeroPower,
  ZeroUtilization,
  TooFewRows,
  // orchestrator
  DatasetMismatch,
  IoError,
  InvalidConfig,
  Precondition,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the harness. `line()` is set for errors tied to a
/// physical input line (CSV rows, replay frames).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  /// The message without the code prefix or line suffix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
  std::optional<std::size_t> line_;
};

}  // namespace edgemark
