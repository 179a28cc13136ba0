#include "edgemark/telemetry.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "edgemark/csv.hpp"
#include "edgemark/error.hpp"

namespace edgemark {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Pre: return "pre";
    case Phase::During: return "during";
    case Phase::Post: return "post";
  }
  return "?";
}

std::optional<Phase> parse_phase(std::string_view text) {
  if (text == "pre") return Phase::Pre;
  if (text == "during") return Phase::During;
  if (text == "post") return Phase::Post;
  return std::nullopt;
}

std::string to_string(const Scope& scope) {
  if (scope.kind == ScopeKind::System) return "system";
  return "process:" + std::to_string(scope.pid);
}

std::optional<Scope> parse_scope(std::string_view text) {
  if (text == "system") return Scope::system();
  if (text.starts_with("process:")) {
    auto pid = csv::parse_int(text.substr(8));
    if (pid && *pid > 0) return Scope::process(static_cast<int>(*pid));
  }
  return std::nullopt;
}

UtilizationSummary aggregate(const TelemetryTrace& trace, Phase phase, ScopeKind scope) {
  UtilizationSummary s;
  double cpu_sum = 0, mem_sum = 0;
  for (const auto& x : trace.samples) {
    if (x.phase != phase || x.scope.kind != scope) continue;
    cpu_sum += x.cpu_pct;
    mem_sum += x.mem_pct;
    s.peak_cpu_pct = s.n_samples == 0 ? x.cpu_pct : std::max(s.peak_cpu_pct, x.cpu_pct);
    s.peak_mem_pct = s.n_samples == 0 ? x.mem_pct : std::max(s.peak_mem_pct, x.mem_pct);
    ++s.n_samples;
  }
  if (s.n_samples == 0)
    throw Error(ErrorCode::NoMatchingSamples,
                "no " + std::string(scope == ScopeKind::System ? "system" : "process") +
                    " samples in phase " + std::string(to_string(phase)));
  s.avg_cpu_pct = cpu_sum / static_cast<double>(s.n_samples);
  s.avg_mem_pct = mem_sum / static_cast<double>(s.n_samples);
  return s;
}

void merge_into(TelemetryTrace& into, const TelemetryTrace& part) {
  into.samples.insert(into.samples.end(), part.samples.begin(), part.samples.end());
  std::stable_sort(into.samples.begin(), into.samples.end(),
                   [](const TelemetrySample& a, const TelemetrySample& b) {
                     return a.t_mono_ms < b.t_mono_ms;
                   });
  if (part.target_pid) into.target_pid = part.target_pid;
  into.interval_ms = part.interval_ms;
}

bool trace_is_well_formed(const TelemetryTrace& trace, std::string* why) {
  auto fail = [&](std::string msg) {
    if (why) *why = std::move(msg);
    return false;
  };
  double last_t = -1e300;
  int last_phase = 0;
  for (const auto& s : trace.samples) {
    if (s.t_mono_ms < last_t) return fail("timestamps decrease");
    if (s.cpu_pct < 0 || s.cpu_pct > 100) return fail("cpu_pct out of range");
    if (s.mem_pct < 0 || s.mem_pct > 100) return fail("mem_pct out of range");
    int p = static_cast<int>(s.phase);
    if (p < last_phase) return fail("phase order violated");
    last_phase = p;
    last_t = s.t_mono_ms;
  }
  return true;
}

void write_trace_csv(std::ostream& out, const TelemetryTrace& trace) {
  out << "t_mono_ms,scope,phase,cpu_pct,mem_pct\n";
  for (const auto& s : trace.samples) {
    out << csv::format_double(s.t_mono_ms) << ',' << to_string(s.scope) << ','
        << to_string(s.phase) << ',' << csv::format_double(s.cpu_pct) << ','
        << csv::format_double(s.mem_pct) << '\n';
  }
}

TelemetryTrace read_trace_csv(std::string_view text) {
  auto records = csv::parse(text);
  if (records.empty() ||
      records[0].fields != std::vector<std::string>{"t_mono_ms", "scope", "phase", "cpu_pct",
                                                    "mem_pct"})
    throw Error(ErrorCode::MalformedRow, "telemetry header must be t_mono_ms,scope,phase,cpu_pct,mem_pct", 1);
  TelemetryTrace trace;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.fields.size() != 5) throw Error(ErrorCode::MalformedRow, "expected 5 fields", r.line);
    auto t = csv::parse_double(r.fields[0]);
    auto scope = parse_scope(r.fields[1]);
    auto phase = parse_phase(r.fields[2]);
    auto cpu = csv::parse_double(r.fields[3]);
    auto mem = csv::parse_double(r.fields[4]);
    if (!t || !scope || !phase || !cpu || !mem)
      throw Error(ErrorCode::MalformedRow, "unparseable telemetry sample", r.line);
    if (scope->kind == ScopeKind::Process) trace.target_pid = scope->pid;
    trace.samples.push_back(TelemetrySample{*t, *scope, *cpu, *mem, *phase});
  }
  std::string why;
  if (!trace_is_well_formed(trace, &why)) throw Error(ErrorCode::MalformedRow, why);
  return trace;
}

double system_cpu_pct(const CpuTimes& before, const CpuTimes& after) {
  if (after.total <= before.total || after.busy < before.busy) return 0.0;
  double pct = 100.0 * static_cast<double>(after.busy - before.busy) /
               static_cast<double>(after.total - before.total);
  return std::clamp(pct, 0.0, 100.0);
}

double process_cpu_pct(std::uint64_t tick_delta, double elapsed_s, double ticks_per_second,
                       unsigned core_count) {
  if (elapsed_s <= 0 || ticks_per_second <= 0 || core_count == 0) return 0.0;
  double busy_s = static_cast<double>(tick_delta) / ticks_per_second;
  return std::clamp(100.0 * busy_s / (elapsed_s * core_count), 0.0, 100.0);
}

// ---------------------------------------------------------------------------

ProcfsProbe::ProcfsProbe(std::string root) : root_(std::move(root)) {}

CpuTimes ProcfsProbe::system_cpu() {
  std::ifstream in(root_ + "/stat");
  std::string tag;
  in >> tag;
  if (tag != "cpu") throw Error(ErrorCode::IoError, "cannot read " + root_ + "/stat");
  std::uint64_t v[8] = {};
  for (auto& x : v) in >> x;
  CpuTimes t;
  for (auto x : v) t.total += x;
  t.busy = t.total - v[3] - v[4];  // idle, iowait
  return t;
}

std::uint64_t ProcfsProbe::total_mem_bytes() {
  std::ifstream in(root_ + "/meminfo");
  std::string key;
  std::uint64_t kb = 0;
  std::string unit;
  while (in >> key >> kb >> unit)
    if (key == "MemTotal:") return kb * 1024;
  throw Error(ErrorCode::IoError, "MemTotal missing from " + root_ + "/meminfo");
}

double ProcfsProbe::system_mem_pct() {
  std::ifstream in(root_ + "/meminfo");
  std::string key, unit;
  std::uint64_t kb = 0, total = 0, available = 0;
  bool have_available = false;
  while (in >> key >> kb >> unit) {
    if (key == "MemTotal:") total = kb;
    if (key == "MemAvailable:") {
      available = kb;
      have_available = true;
    }
  }
  if (total == 0 || !have_available)
    throw Error(ErrorCode::IoError, "cannot read " + root_ + "/meminfo");
  return std::clamp(100.0 * static_cast<double>(total - std::min(available, total)) /
                        static_cast<double>(total),
                    0.0, 100.0);
}

std::optional<ProcessCounters> ProcfsProbe::process(int pid) {
  if (pid <= 0) return std::nullopt;
  std::ifstream in(root_ + "/" + std::to_string(pid) + "/stat");
  if (!in) return std::nullopt;
  std::string line;
  std::getline(in, line);
  auto close = line.rfind(')');
  if (close == std::string::npos) return std::nullopt;
  std::istringstream fields(line.substr(close + 1));
  std::vector<std::string> tok;
  for (std::string t; fields >> t;) tok.push_back(t);
  // tok[0] is field 3 (state); utime=14, stime=15, rss=24.
  if (tok.size() < 22) return std::nullopt;
  if (tok[0] == "Z" || tok[0] == "X" || tok[0] == "x") return std::nullopt;
  ProcessCounters c;
  c.cpu_ticks = std::stoull(tok[11]) + std::stoull(tok[12]);
  long long rss_pages = std::stoll(tok[21]);
  c.rss_bytes = rss_pages > 0 ? static_cast<std::uint64_t>(rss_pages) *
                                    static_cast<std::uint64_t>(sysconf(_SC_PAGESIZE))
                              : 0;
  return c;
}

unsigned ProcfsProbe::core_count() {
  std::ifstream in(root_ + "/stat");
  unsigned n = 0;
  for (std::string line; std::getline(in, line);)
    if (line.size() > 3 && line.starts_with("cpu") && line[3] >= '0' && line[3] <= '9') ++n;
  return n ? n : 1;
}

double ProcfsProbe::ticks_per_second() { return static_cast<double>(sysconf(_SC_CLK_TCK)); }

// ---------------------------------------------------------------------------

struct SamplerHandle::State {
  std::shared_ptr<ResourceProbe> probe;
  std::shared_ptr<Clock> clock;
  SamplerOptions options;

  std::mutex mu;
  std::condition_variable cv;
  bool stop_requested = false;
  bool started = false;
  bool stopped = false;
  std::thread worker;
  TelemetryTrace trace;

  // Previous readings, owned by the worker thread.
  std::int64_t prev_us = 0;
  CpuTimes prev_sys;
  std::optional<ProcessCounters> prev_proc;
  bool track_process = false;
  double total_mem = 1;
  unsigned cores = 1;
  double hz = 100;

  void take_sample() {
    const std::int64_t now = clock->now_us();
    const double elapsed_s = us_to_s(now - prev_us);
    const CpuTimes sys = probe->system_cpu();
    TelemetrySample s;
    s.t_mono_ms = us_to_ms(now);
    s.scope = Scope::system();
    s.phase = options.phase;
    s.cpu_pct = system_cpu_pct(prev_sys, sys);
    s.mem_pct = probe->system_mem_pct();
    trace.samples.push_back(s);
    prev_sys = sys;

    if (track_process) {
      auto pc = probe->process(options.target_pid);
      if (!pc) {
        track_process = false;
      } else {
        TelemetrySample p;
        p.t_mono_ms = s.t_mono_ms;
        p.scope = Scope::process(options.target_pid);
        p.phase = options.phase;
        std::uint64_t prev_ticks = prev_proc ? prev_proc->cpu_ticks : pc->cpu_ticks;
        p.cpu_pct = process_cpu_pct(pc->cpu_ticks >= prev_ticks ? pc->cpu_ticks - prev_ticks : 0,
                                    elapsed_s, hz, cores);
        p.mem_pct = std::clamp(100.0 * static_cast<double>(pc->rss_bytes) / total_mem, 0.0, 100.0);
        trace.samples.push_back(p);
        prev_proc = pc;
      }
    }
    prev_us = now;
  }

  void run(std::chrono::steady_clock::time_point t0) {
    const auto interval = std::chrono::milliseconds(options.interval_ms);
    auto deadline = t0 + interval;
    std::unique_lock lock(mu);
    while (true) {
      if (cv.wait_until(lock, deadline, [&] { return stop_requested; })) break;
      lock.unlock();
      take_sample();
      lock.lock();
      deadline += interval;
    }
    lock.unlock();
    // One sample is always recorded, even when stopped before the first tick.
    if (trace.samples.empty()) take_sample();
  }
};

SamplerHandle::SamplerHandle(std::shared_ptr<ResourceProbe> probe, std::shared_ptr<Clock> clock,
                             SamplerOptions options)
    : state_(std::make_unique<State>()) {
  if (options.interval_ms <= 0) throw Error(ErrorCode::Precondition, "interval_ms must be positive");
  state_->probe = probe ? std::move(probe) : std::make_shared<ProcfsProbe>();
  state_->clock = clock ? std::move(clock) : std::make_shared<SteadyClock>();
  state_->options = options;
  state_->trace.interval_ms = options.interval_ms;
  state_->trace.target_pid = options.target_pid;
}

SamplerHandle::~SamplerHandle() {
  if (state_ && state_->started && !state_->stopped) {
    {
      std::lock_guard lock(state_->mu);
      state_->stop_requested = true;
    }
    state_->cv.notify_all();
    if (state_->worker.joinable()) state_->worker.join();
  }
}

SamplerHandle::SamplerHandle(SamplerHandle&&) noexcept = default;
SamplerHandle& SamplerHandle::operator=(SamplerHandle&&) noexcept = default;

void SamplerHandle::start() {
  auto& st = *state_;
  if (st.started) throw Error(ErrorCode::SamplerAlreadyRunning, "sampler already started");
  st.track_process = st.options.phase == Phase::During && st.options.target_pid > 0;
  if (st.track_process) {
    st.prev_proc = st.probe->process(st.options.target_pid);
    if (!st.prev_proc)
      throw Error(ErrorCode::NoSuchProcess,
                  "process " + std::to_string(st.options.target_pid) + " does not exist");
  }
  st.cores = st.probe->core_count();
  st.hz = st.probe->ticks_per_second();
  st.total_mem = static_cast<double>(std::max<std::uint64_t>(st.probe->total_mem_bytes(), 1));
  st.prev_us = st.clock->now_us();
  st.prev_sys = st.probe->system_cpu();
  st.started = true;
  auto t0 = std::chrono::steady_clock::now();
  st.worker = std::thread([&st, t0] { st.run(t0); });
}

TelemetryTrace SamplerHandle::stop() {
  auto& st = *state_;
  if (st.stopped) throw Error(ErrorCode::AlreadyStopped, "sampler already stopped");
  if (!st.started) throw Error(ErrorCode::Precondition, "sampler was never started");
  {
    std::lock_guard lock(st.mu);
    st.stop_requested = true;
  }
  st.cv.notify_all();
  st.worker.join();
  st.stopped = true;
  return std::move(st.trace);
}

bool SamplerHandle::running() const { return state_ && state_->started && !state_->stopped; }

SamplerHandle start_sampler(int target_pid, int interval_ms, Phase phase,
                            std::shared_ptr<ResourceProbe> probe, std::shared_ptr<Clock> clock) {
  SamplerHandle h(std::move(probe), std::move(clock), SamplerOptions{interval_ms, phase, target_pid});
  h.start();
  return h;
}

TelemetryTrace synthesize_trace(const SyntheticLoad& load, std::int64_t start_us,
                                std::int64_t end_us, int interval_ms, Phase phase,
                                std::optional<int> pid) {
  if (interval_ms <= 0) throw Error(ErrorCode::Precondition, "interval_ms must be positive");
  TelemetryTrace trace;
  trace.interval_ms = interval_ms;
  trace.target_pid = pid.value_or(0);
  auto emit = [&](std::int64_t t_us) {
    trace.samples.push_back(
        TelemetrySample{us_to_ms(t_us), Scope::system(), load.system_cpu_pct, load.system_mem_pct, phase});
    if (pid)
      trace.samples.push_back(TelemetrySample{us_to_ms(t_us), Scope::process(*pid),
                                              load.process_cpu_pct, load.process_mem_pct, phase});
  };
  const std::int64_t step = static_cast<std::int64_t>(interval_ms) * 1000;
  for (std::int64_t t = start_us + step; t <= end_us; t += step) emit(t);
  if (trace.samples.empty()) emit(std::max(start_us, end_us));
  return trace;
}

}  // namespace edgemark
