#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

// Runner wire protocol: one compact JSON object per line over the runner's
// stdin/stdout. Unknown fields are ignored; an unknown "type" is a protocol
// violation.
namespace edgemark::protocol {

struct Init {
  std::string model;
  int q_bits = 32;
  std::vector<std::string> labels;
};

struct Ready {
  std::string runner;
  int pid = 0;
};

struct Predict {
  std::string id;
  std::string text;
};

struct Prediction {
  std::string id;
  std::string label;
  std::optional<double> latency_s;
};

struct ErrorMessage {
  std::optional<std::string> id;
  std::string message;
};

struct Shutdown {};

using Message = std::variant<Init, Ready, Predict, Prediction, ErrorMessage, Shutdown>;

/// Compact single-line JSON with fields in protocol order; no trailing newline.
std::string encode(const Message& message);

/// Throws Error{ProtocolViolation} for non-JSON, non-object, missing or
/// mistyped fields, or an unknown "type".
Message decode(std::string_view line);

std::string_view type_name(const Message& message);

}  // namespace edgemark::protocol
