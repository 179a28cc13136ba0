#include "edgemark/runner.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "edgemark/error.hpp"

extern char** environ;

namespace edgemark {

bool valid_q_bits(int q_bits) { return q_bits == 8 || q_bits == 16 || q_bits == 32; }

void RunnerSpec::validate() const {
  if (command.empty()) throw Error(ErrorCode::InvalidConfig, "runner command is empty");
  if (!valid_q_bits(q_bits))
    throw Error(ErrorCode::InvalidConfig, "q_bits must be 8, 16 or 32, got " + std::to_string(q_bits));
  if (!(flops_per_inference > 0))
    throw Error(ErrorCode::InvalidConfig, "flops_per_inference must be positive");
}

std::string to_string(const ExitStatus& status) {
  switch (status.kind) {
    case ExitStatus::Kind::Exited: return "exited(" + std::to_string(status.code) + ")";
    case ExitStatus::Kind::Signaled: return "signaled(" + std::to_string(status.code) + ")";
    case ExitStatus::Kind::Killed: return "killed";
  }
  return "?";
}

InferenceRecord RunnerSession::predict(const LabeledSample& sample) {
  if (broken_) throw Error(ErrorCode::Precondition, "session is not ready");
  const std::string request = protocol::encode(protocol::Predict{sample.id, sample.clean_text});
  const std::int64_t t0 = clock_->now_us();
  protocol::Message response;
  try {
    response = exchange(request);
  } catch (...) {
    broken_ = true;
    throw;
  }
  const std::int64_t t1 = clock_->now_us();

  auto fail = [&](ErrorCode code, const std::string& msg) -> InferenceRecord {
    broken_ = true;
    throw Error(code, msg);
  };
  if (auto* err = std::get_if<protocol::ErrorMessage>(&response))
    return fail(ErrorCode::RunnerError, "runner error for '" + sample.id + "': " + err->message);
  auto* pred = std::get_if<protocol::Prediction>(&response);
  if (!pred)
    return fail(ErrorCode::ProtocolViolation,
                "expected prediction, got " + std::string(protocol::type_name(response)));
  if (pred->id != sample.id)
    return fail(ErrorCode::ProtocolViolation,
                "prediction for '" + pred->id + "' while waiting for '" + sample.id + "'");
  bool known = false;
  for (const auto& l : labels_) known = known || l.name == pred->label;
  if (!known)
    return fail(ErrorCode::UnknownLabelReturned, "label '" + pred->label + "' is not in the label set");

  InferenceRecord rec;
  rec.sample_id = sample.id;
  rec.predicted_label = ClassLabel{pred->label};
  rec.latency_s = us_to_s(t1 - t0);
  rec.t_start_ms = us_to_ms(t0);
  rec.t_end_ms = us_to_ms(t1);
  rec.runner_latency_s = pred->latency_s;
  return rec;
}

// ---------------------------------------------------------------------------

namespace {

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::RunnerCrashed, std::string("write to runner failed: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

/// Drains a pipe on its own thread and hands complete lines to the reader.
class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd), thread_([this] { run(); }) {}
  ~LineReader() {
    if (thread_.joinable()) thread_.join();
  }

  enum class Result { Line, Eof, Timeout };

  Result next(std::string& line, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, timeout, [&] { return !lines_.empty() || eof_; })) return Result::Timeout;
    if (lines_.empty()) return Result::Eof;
    line = std::move(lines_.front());
    lines_.pop_front();
    return Result::Line;
  }

  void join() {
    if (thread_.joinable()) thread_.join();
  }

 private:
  void run() {
    std::string buf;
    char chunk[4096];
    while (true) {
      ssize_t n = ::read(fd_, chunk, sizeof(chunk));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      buf.append(chunk, static_cast<std::size_t>(n));
      std::size_t pos;
      while ((pos = buf.find('\n')) != std::string::npos) {
        std::lock_guard lock(mu_);
        lines_.push_back(buf.substr(0, pos));
        buf.erase(0, pos + 1);
        cv_.notify_all();
      }
    }
    std::lock_guard lock(mu_);
    if (!buf.empty()) lines_.push_back(buf);
    eof_ = true;
    cv_.notify_all();
  }

  int fd_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> lines_;
  bool eof_ = false;
  std::thread thread_;
};

/// Keeps the last few KiB of the runner's stderr for diagnostics.
class StderrDrain {
 public:
  explicit StderrDrain(int fd) : fd_(fd), thread_([this] { run(); }) {}
  ~StderrDrain() {
    if (thread_.joinable()) thread_.join();
  }
  std::string tail() {
    std::lock_guard lock(mu_);
    return tail_;
  }
  void join() {
    if (thread_.joinable()) thread_.join();
  }

 private:
  void run() {
    char chunk[1024];
    while (true) {
      ssize_t n = ::read(fd_, chunk, sizeof(chunk));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      std::lock_guard lock(mu_);
      tail_.append(chunk, static_cast<std::size_t>(n));
      if (tail_.size() > 4096) tail_.erase(0, tail_.size() - 4096);
    }
  }

  int fd_;
  std::mutex mu_;
  std::string tail_;
  std::thread thread_;
};

class ProcessSession final : public RunnerSession {
 public:
  ProcessSession(const RunnerSpec& spec, std::vector<ClassLabel> labels, std::shared_ptr<Clock> clock)
      : RunnerSession(std::move(labels), std::move(clock)), spec_(spec) {}

  ~ProcessSession() override { shutdown(); }

  int pid() const override { return pid_; }

  void launch() {
    static std::once_flag sigpipe_once;
    std::call_once(sigpipe_once, [] { ::signal(SIGPIPE, SIG_IGN); });

    if (spec_.command.find('/') != std::string::npos && ::access(spec_.command.c_str(), X_OK) != 0)
      throw Error(ErrorCode::SpawnFailed, spec_.command + ": " + std::strerror(errno));

    int in[2], out[2], err[2];
    if (::pipe2(in, O_CLOEXEC) || ::pipe2(out, O_CLOEXEC) || ::pipe2(err, O_CLOEXEC))
      throw Error(ErrorCode::SpawnFailed, std::string("pipe: ") + std::strerror(errno));

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in[0], 0);
    posix_spawn_file_actions_adddup2(&actions, out[1], 1);
    posix_spawn_file_actions_adddup2(&actions, err[1], 2);

    std::vector<std::string> argv_s{spec_.command};
    argv_s.insert(argv_s.end(), spec_.args.begin(), spec_.args.end());
    if (!spec_.model_path.empty()) {
      argv_s.push_back("--model");
      argv_s.push_back(spec_.model_path);
    }
    std::vector<char*> argv;
    for (auto& a : argv_s) argv.push_back(a.data());
    argv.push_back(nullptr);

    std::map<std::string, std::string> env_map;
    for (char** e = environ; e && *e; ++e) {
      std::string_view kv(*e);
      auto eq = kv.find('=');
      if (eq != std::string_view::npos) env_map[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
    }
    for (const auto& [k, v] : spec_.env) env_map[k] = v;
    std::vector<std::string> env_s;
    for (const auto& [k, v] : env_map) env_s.push_back(k + "=" + v);
    std::vector<char*> envp;
    for (auto& e : env_s) envp.push_back(e.data());
    envp.push_back(nullptr);

    pid_t pid = 0;
    int rc = ::posix_spawnp(&pid, spec_.command.c_str(), &actions, nullptr, argv.data(), envp.data());
    posix_spawn_file_actions_destroy(&actions);
    ::close(in[0]);
    ::close(out[1]);
    ::close(err[1]);
    if (rc != 0) {
      ::close(in[1]);
      ::close(out[0]);
      ::close(err[0]);
      throw Error(ErrorCode::SpawnFailed, spec_.command + ": " + std::strerror(rc));
    }
    pid_ = pid;
    stdin_fd_ = in[1];
    stdout_fd_ = out[0];
    stderr_fd_ = err[0];
    reader_ = std::make_unique<LineReader>(stdout_fd_);
    drain_ = std::make_unique<StderrDrain>(stderr_fd_);
  }

  void handshake() {
    std::vector<std::string> names;
    for (const auto& l : labels_) names.push_back(l.name);
    try {
      write_all(stdin_fd_, protocol::encode(protocol::Init{spec_.model_path, spec_.q_bits, names}) + "\n");
    } catch (const Error&) {
      throw Error(ErrorCode::SpawnFailed, "runner closed its input before init: " + stderr_tail());
    }
    std::string line;
    switch (reader_->next(line, spec_.handshake_timeout)) {
      case LineReader::Result::Timeout:
        throw Error(ErrorCode::HandshakeTimeout, "no ready message within " +
                                                     std::to_string(spec_.handshake_timeout.count()) + " ms");
      case LineReader::Result::Eof:
        throw Error(ErrorCode::SpawnFailed, "runner exited during handshake: " + stderr_tail());
      case LineReader::Result::Line:
        break;
    }
    auto msg = protocol::decode(line);
    if (auto* err = std::get_if<protocol::ErrorMessage>(&msg))
      throw Error(ErrorCode::SpawnFailed, "runner failed to initialize: " + err->message);
    auto* ready = std::get_if<protocol::Ready>(&msg);
    if (!ready)
      throw Error(ErrorCode::ProtocolViolation,
                  "expected ready, got " + std::string(protocol::type_name(msg)));
    runner_name_ = ready->runner;
  }

  ExitStatus shutdown() override {
    if (status_) return *status_;
    if (pid_ <= 0) {
      status_ = ExitStatus{};
      return *status_;
    }
    if (stdin_fd_ >= 0) {
      try {
        write_all(stdin_fd_, protocol::encode(protocol::Shutdown{}) + "\n");
      } catch (const Error&) {
      }
      ::close(stdin_fd_);
      stdin_fd_ = -1;
    }
    int wstatus = 0;
    const auto deadline = std::chrono::steady_clock::now() + spec_.shutdown_grace;
    pid_t r = 0;
    while ((r = ::waitpid(pid_, &wstatus, WNOHANG)) == 0 && std::chrono::steady_clock::now() < deadline)
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    if (r == pid_) {
      status_ = WIFEXITED(wstatus) ? ExitStatus{ExitStatus::Kind::Exited, WEXITSTATUS(wstatus)}
                                   : ExitStatus{ExitStatus::Kind::Signaled, WTERMSIG(wstatus)};
    } else {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &wstatus, 0);
      status_ = ExitStatus{ExitStatus::Kind::Killed, SIGKILL};
    }
    if (reader_) reader_->join();
    if (drain_) drain_->join();
    if (stdout_fd_ >= 0) ::close(stdout_fd_);
    if (stderr_fd_ >= 0) ::close(stderr_fd_);
    stdout_fd_ = stderr_fd_ = -1;
    return *status_;
  }

 protected:
  protocol::Message exchange(const std::string& request) override {
    if (status_) throw Error(ErrorCode::RunnerCrashed, "runner already shut down");
    write_all(stdin_fd_, request + "\n");
    std::string line;
    switch (reader_->next(line, spec_.predict_timeout)) {
      case LineReader::Result::Timeout:
        throw Error(ErrorCode::PredictTimeout,
                    "no response within " + std::to_string(spec_.predict_timeout.count()) + " ms");
      case LineReader::Result::Eof:
        throw Error(ErrorCode::RunnerCrashed, "runner closed its output: " + stderr_tail());
      case LineReader::Result::Line:
        break;
    }
    return protocol::decode(line);
  }

 private:
  std::string stderr_tail() {
    if (!drain_) return {};
    // Give the drainer a moment to catch the last words of a dying runner.
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    auto t = drain_->tail();
    return t.empty() ? "(no stderr)" : t;
  }

  RunnerSpec spec_;
  pid_t pid_ = -1;
  int stdin_fd_ = -1, stdout_fd_ = -1, stderr_fd_ = -1;
  std::unique_ptr<LineReader> reader_;
  std::unique_ptr<StderrDrain> drain_;
  std::optional<ExitStatus> status_;
};

}  // namespace

std::unique_ptr<RunnerSession> spawn_runner(const RunnerSpec& spec, const std::vector<ClassLabel>& labels,
                                            std::shared_ptr<Clock> clock) {
  spec.validate();
  auto session = std::make_unique<ProcessSession>(spec, labels,
                                                  clock ? std::move(clock) : std::make_shared<SteadyClock>());
  session->launch();
  try {
    session->handshake();
  } catch (...) {
    session->shutdown();
    throw;
  }
  return session;
}

}  // namespace edgemark
