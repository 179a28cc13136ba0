#include "edgemark/protocol.hpp"

#include <json.hpp>

#include "edgemark/error.hpp"

namespace edgemark::protocol {

using ordered_json = nlohmann::ordered_json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void violation(const std::string& what) {
  throw Error(ErrorCode::ProtocolViolation, what);
}

const ordered_json& field(const ordered_json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) violation(std::string("missing field '") + key + "'");
  return *it;
}

std::string string_field(const ordered_json& obj, const char* key) {
  const auto& v = field(obj, key);
  if (!v.is_string()) violation(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

int int_field(const ordered_json& obj, const char* key) {
  const auto& v = field(obj, key);
  if (!v.is_number_integer()) violation(std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

}  // namespace

std::string encode(const Message& message) {
  ordered_json j = std::visit(
      overloaded{
          [](const Init& m) {
            return ordered_json{{"type", "init"}, {"model", m.model}, {"q_bits", m.q_bits},
                                {"labels", m.labels}};
          },
          [](const Ready& m) {
            return ordered_json{{"type", "ready"}, {"runner", m.runner}, {"pid", m.pid}};
          },
          [](const Predict& m) {
            return ordered_json{{"type", "predict"}, {"id", m.id}, {"text", m.text}};
          },
          [](const Prediction& m) {
            ordered_json o{{"type", "prediction"}, {"id", m.id}, {"label", m.label}};
            if (m.latency_s) o["latency_s"] = *m.latency_s;
            return o;
          },
          [](const ErrorMessage& m) {
            ordered_json o{{"type", "error"}};
            o["id"] = m.id ? ordered_json(*m.id) : ordered_json(nullptr);
            o["message"] = m.message;
            return o;
          },
          [](const Shutdown&) { return ordered_json{{"type", "shutdown"}}; },
      },
      message);
  return j.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
}

Message decode(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const ordered_json::parse_error& e) {
    violation("not a JSON object: '" + std::string(line.substr(0, 80)) + "'");
  }
  if (!j.is_object()) violation("message is not a JSON object");
  const std::string type = string_field(j, "type");

  if (type == "init") {
    Init m;
    m.model = string_field(j, "model");
    m.q_bits = int_field(j, "q_bits");
    const auto& labels = field(j, "labels");
    if (!labels.is_array()) violation("field 'labels' must be an array");
    for (const auto& l : labels) {
      if (!l.is_string()) violation("labels must be strings");
      m.labels.push_back(l.get<std::string>());
    }
    return m;
  }
  if (type == "ready") return Ready{string_field(j, "runner"), int_field(j, "pid")};
  if (type == "predict") return Predict{string_field(j, "id"), string_field(j, "text")};
  if (type == "prediction") {
    Prediction m{string_field(j, "id"), string_field(j, "label"), std::nullopt};
    if (auto it = j.find("latency_s"); it != j.end() && !it->is_null()) {
      if (!it->is_number()) violation("field 'latency_s' must be a number");
      m.latency_s = it->get<double>();
    }
    return m;
  }
  if (type == "error") {
    ErrorMessage m;
    if (auto it = j.find("id"); it != j.end() && !it->is_null()) {
      if (!it->is_string()) violation("field 'id' must be a string or null");
      m.id = it->get<std::string>();
    }
    m.message = string_field(j, "message");
    return m;
  }
  if (type == "shutdown") return Shutdown{};
  violation("unknown message type '" + type + "'");
}

std::string_view type_name(const Message& message) {
  static constexpr std::string_view names[] = {"init",       "ready", "predict",
                                               "prediction", "error", "shutdown"};
  return names[message.index()];
}

}  // namespace edgemark::protocol
