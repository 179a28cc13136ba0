#include "edgemark/clock.hpp"

#include <chrono>
#include <thread>

#include "edgemark/error.hpp"

namespace edgemark {

namespace {
const std::chrono::steady_clock::time_point kEpoch = std::chrono::steady_clock::now();
}

std::int64_t SteadyClock::now_us() const {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::steady_clock::now() - kEpoch)
      .count();
}

void SteadyClock::sleep_us(std::int64_t us) {
  if (us > 0) std::this_thread::sleep_for(std::chrono::microseconds(us));
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NoSuchProcess: return "NoSuchProcess";
    case ErrorCode::SamplerAlreadyRunning: return "SamplerAlreadyRunning";
    case ErrorCode::AlreadyStopped: return "AlreadyStopped";
    case ErrorCode::NoMatchingSamples: return "NoMatchingSamples";
    case ErrorCode::MalformedFrame: return "MalformedFrame";
    case ErrorCode::AdcOutOfRange: return "AdcOutOfRange";
    case ErrorCode::WindowOutsideTrace: return "WindowOutsideTrace";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::SpawnFailed: return "SpawnFailed";
    case ErrorCode::HandshakeTimeout: return "HandshakeTimeout";
    case ErrorCode::ProtocolViolation: return "ProtocolViolation";
    case ErrorCode::RunnerCrashed: return "RunnerCrashed";
    case ErrorCode::PredictTimeout: return "PredictTimeout";
    case ErrorCode::UnknownLabelReturned: return "UnknownLabelReturned";
    case ErrorCode::RunnerError: return "RunnerError";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::EmptyRecords: return "EmptyRecords";
    case ErrorCode::ZeroPower: return "ZeroPower";
    case ErrorCode::ZeroUtilization: return "ZeroUtilization";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::DatasetMismatch: return "DatasetMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Precondition: return "Precondition";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::optional<std::size_t> line)
    : std::runtime_error(std::string(to_string(code)) + ": " + message +
                         (line ? " (line " + std::to_string(*line) + ")" : std::string())),
      code_(code),
      message_(message),
      line_(line) {}

}  // namespace edgemark
