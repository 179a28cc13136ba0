#include <unistd.h>

#include <cmath>
#include <numbers>

#include "edgemark/error.hpp"
#include "edgemark/runner.hpp"

namespace edgemark {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum Stream : std::uint64_t { kLabel = 1, kLatencyA = 2, kLatencyB = 3 };

std::int64_t to_micros(double seconds) {
  return std::max<std::int64_t>(1, std::llround(seconds * 1e6));
}

}  // namespace

double counter_uniform(std::uint64_t seed, std::uint64_t counter, std::uint64_t stream) {
  const std::uint64_t key = splitmix64(seed ^ splitmix64(stream));
  const std::uint64_t bits = splitmix64(key ^ splitmix64(counter + 0x632be59bd9b4e019ULL * stream));
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

std::uint64_t mix_seed(std::uint64_t profile_seed, std::uint64_t run_seed) {
  return splitmix64(profile_seed ^ splitmix64(run_seed ^ 0xa0761d6478bd642fULL));
}

void SimProfile::validate(std::size_t n_labels) const {
  if (confusion.size() != n_labels)
    throw Error(ErrorCode::InvalidConfig, "confusion matrix has " + std::to_string(confusion.size()) +
                                              " rows for " + std::to_string(n_labels) + " labels");
  for (std::size_t i = 0; i < confusion.size(); ++i) {
    const auto& row = confusion[i];
    if (row.size() != n_labels)
      throw Error(ErrorCode::InvalidConfig, "confusion row " + std::to_string(i) + " has wrong width");
    double sum = 0;
    for (double p : row) {
      if (!(p >= 0) || !std::isfinite(p))
        throw Error(ErrorCode::InvalidConfig, "confusion entries must be finite and nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw Error(ErrorCode::InvalidConfig, "confusion row " + std::to_string(i) + " does not sum to 1");
  }
  if (latency.kind == LatencyModel::Kind::Constant && !(latency.seconds > 0))
    throw Error(ErrorCode::InvalidConfig, "constant latency must be positive");
  if (latency.kind == LatencyModel::Kind::LogNormal &&
      (!std::isfinite(latency.mu) || !(latency.sigma >= 0) || !std::isfinite(latency.sigma)))
    throw Error(ErrorCode::InvalidConfig, "log-normal latency needs finite mu and sigma >= 0");
}

SimProfile SimProfile::identity(std::size_t n_labels, LatencyModel latency, std::uint64_t seed) {
  SimProfile p;
  p.seed = seed;
  p.latency = latency;
  p.confusion.assign(n_labels, std::vector<double>(n_labels, 0.0));
  for (std::size_t i = 0; i < n_labels; ++i) p.confusion[i][i] = 1.0;
  return p;
}

SimDraw sim_predict(const SimProfile& profile, std::size_t truth_index, std::uint64_t draw_index) {
  const auto& row = profile.confusion.at(truth_index);
  const double u = counter_uniform(profile.seed, draw_index, kLabel);
  SimDraw d;
  double cumulative = 0;
  d.label_index = row.size();
  for (std::size_t j = 0; j < row.size(); ++j) {
    cumulative += row[j];
    if (u < cumulative && row[j] > 0) {
      d.label_index = j;
      break;
    }
  }
  if (d.label_index == row.size()) {  // rounding left u above the last partial sum
    for (std::size_t j = row.size(); j-- > 0;)
      if (row[j] > 0) {
        d.label_index = j;
        break;
      }
  }

  double seconds = profile.latency.seconds;
  if (profile.latency.kind == LatencyModel::Kind::LogNormal) {
    const double u1 = 1.0 - counter_uniform(profile.seed, draw_index, kLatencyA);  // (0, 1]
    const double u2 = counter_uniform(profile.seed, draw_index, kLatencyB);
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    seconds = std::exp(profile.latency.mu + profile.latency.sigma * z);
  }
  d.latency_us = to_micros(seconds);
  d.latency_s = static_cast<double>(d.latency_us) / 1e6;
  return d;
}

// ---------------------------------------------------------------------------

SimulatorServer::SimulatorServer(SimProfile profile, std::unordered_map<std::string, std::string> truth,
                                 std::shared_ptr<Clock> clock)
    : profile_(std::move(profile)), truth_(std::move(truth)), clock_(std::move(clock)) {}

std::optional<std::string> SimulatorServer::handle(std::string_view line) {
  if (finished_) return std::nullopt;
  protocol::Message msg;
  try {
    msg = protocol::decode(line);
  } catch (const Error& e) {
    return protocol::encode(protocol::ErrorMessage{std::nullopt, e.what()});
  }

  if (auto* init = std::get_if<protocol::Init>(&msg)) {
    try {
      profile_.validate(init->labels.size());
    } catch (const Error& e) {
      return protocol::encode(protocol::ErrorMessage{std::nullopt, e.what()});
    }
    labels_ = init->labels;
    initialized_ = true;
    return protocol::encode(protocol::Ready{"edgemark-sim", static_cast<int>(::getpid())});
  }
  if (auto* req = std::get_if<protocol::Predict>(&msg)) {
    if (!initialized_) return protocol::encode(protocol::ErrorMessage{req->id, "predict before init"});
    auto it = truth_.find(req->id);
    if (it == truth_.end()) return protocol::encode(protocol::ErrorMessage{req->id, "unknown sample id"});
    std::size_t truth_index = labels_.size();
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == it->second) truth_index = i;
    if (truth_index == labels_.size())
      return protocol::encode(protocol::ErrorMessage{req->id, "truth label not in init labels"});
    const SimDraw d = sim_predict(profile_, truth_index, draws_++);
    clock_->sleep_us(d.latency_us);
    return protocol::encode(protocol::Prediction{req->id, labels_[d.label_index], d.latency_s});
  }
  if (std::holds_alternative<protocol::Shutdown>(msg)) {
    finished_ = true;
    return std::nullopt;
  }
  return protocol::encode(protocol::ErrorMessage{
      std::nullopt, "unexpected message type '" + std::string(protocol::type_name(msg)) + "'"});
}

namespace {

class SimulatorSession final : public RunnerSession {
 public:
  SimulatorSession(SimulatorServer server, std::vector<ClassLabel> labels, std::shared_ptr<Clock> clock)
      : RunnerSession(std::move(labels), std::move(clock)), server_(std::move(server)) {}

  int pid() const override { return static_cast<int>(::getpid()); }

  void handshake(const SimulatorInit& init) {
    std::vector<std::string> names;
    for (const auto& l : labels_) names.push_back(l.name);
    auto reply = server_.handle(protocol::encode(protocol::Init{init.model_path, init.q_bits, names}));
    auto msg = protocol::decode(reply.value_or(""));
    if (auto* err = std::get_if<protocol::ErrorMessage>(&msg))
      throw Error(ErrorCode::SpawnFailed, "simulator failed to initialize: " + err->message);
    auto* ready = std::get_if<protocol::Ready>(&msg);
    if (!ready) throw Error(ErrorCode::ProtocolViolation, "expected ready");
    runner_name_ = ready->runner;
  }

  ExitStatus shutdown() override {
    if (!server_.finished()) server_.handle(protocol::encode(protocol::Shutdown{}));
    return ExitStatus{};
  }

 protected:
  protocol::Message exchange(const std::string& request) override {
    auto reply = server_.handle(request);
    if (!reply) throw Error(ErrorCode::RunnerCrashed, "simulator already shut down");
    return protocol::decode(*reply);
  }

 private:
  SimulatorServer server_;
};

}  // namespace

std::unique_ptr<RunnerSession> spawn_simulator(const SimProfile& profile, const Dataset& dataset,
                                               std::shared_ptr<Clock> clock, const SimulatorInit& init) {
  std::unordered_map<std::string, std::string> truth;
  for (const auto& s : dataset.samples) truth.emplace(s.id, s.label.name);
  if (!clock) clock = std::make_shared<SteadyClock>();
  auto session = std::make_unique<SimulatorSession>(SimulatorServer(profile, std::move(truth), clock),
                                                    dataset.label_set, clock);
  session->handshake(init);
  return session;
}

}  // namespace edgemark
