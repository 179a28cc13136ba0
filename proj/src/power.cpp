#include "edgemark/power.hpp"

#include <fcntl.h>
#include <poll.h>
#include <termios.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <atomic>
#include <mutex>
#include <ostream>
#include <thread>

#include "edgemark/csv.hpp"
#include "edgemark/error.hpp"

namespace edgemark {

void SensorConfig::validate() const {
  if (!(v_ref > 0)) throw Error(ErrorCode::InvalidConfig, "v_ref must be positive");
  if (adc_resolution < 2 || (adc_resolution & (adc_resolution - 1)) != 0)
    throw Error(ErrorCode::InvalidConfig, "adc_resolution must be a power of two >= 2");
  if (!(supply_voltage > 0)) throw Error(ErrorCode::InvalidConfig, "supply_voltage must be positive");
  if (calibration) {
    if (!(calibration->sensitivity_v_per_a > 0))
      throw Error(ErrorCode::InvalidConfig, "sensitivity_v_per_a must be positive");
    if (calibration->offset_counts < 0 || calibration->offset_counts >= adc_resolution)
      throw Error(ErrorCode::InvalidConfig, "offset_counts must lie in [0, adc_resolution)");
  }
}

namespace {

std::optional<std::int64_t> parse_unsigned(std::string_view s) {
  if (s.empty() || s.size() > 18) return std::nullopt;
  if (s.size() > 1 && s[0] == '0') return std::nullopt;  // no padding
  std::int64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

double interpolate(const std::vector<PowerSample>& s, double t) {
  auto it = std::lower_bound(s.begin(), s.end(), t,
                             [](const PowerSample& p, double x) { return p.t_mono_ms < x; });
  if (it == s.end()) return s.back().power_w;
  if (it->t_mono_ms == t || it == s.begin()) return it->power_w;
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double span = b.t_mono_ms - a.t_mono_ms;
  if (span <= 0) return b.power_w;
  return a.power_w + (b.power_w - a.power_w) * (t - a.t_mono_ms) / span;
}

}  // namespace

Frame decode_frame(std::string_view line, const SensorConfig& cfg) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  auto comma = line.find(',');
  if (comma == std::string_view::npos)
    throw Error(ErrorCode::MalformedFrame, "missing ',' in frame '" + std::string(line) + "'");
  auto t = parse_unsigned(line.substr(0, comma));
  auto adc = parse_unsigned(line.substr(comma + 1));
  if (!t || !adc) throw Error(ErrorCode::MalformedFrame, "non-numeric field in '" + std::string(line) + "'");
  if (*adc >= cfg.adc_resolution)
    throw Error(ErrorCode::AdcOutOfRange,
                std::to_string(*adc) + " >= resolution " + std::to_string(cfg.adc_resolution));
  return Frame{*t, static_cast<int>(*adc)};
}

double adc_to_current(int adc_count, const SensorConfig& cfg) {
  if (adc_count < 0 || adc_count >= cfg.adc_resolution)
    throw Error(ErrorCode::Precondition, "adc_count outside [0, resolution)");
  if (!cfg.calibration)
    return static_cast<double>(adc_count) * cfg.v_ref / static_cast<double>(cfg.adc_resolution);
  const auto& c = *cfg.calibration;
  return (static_cast<double>(adc_count) - c.offset_counts) *
         (cfg.v_ref / static_cast<double>(cfg.adc_resolution)) / c.sensitivity_v_per_a;
}

PowerSample make_power_sample(const Frame& frame, double t_mono_ms, const SensorConfig& cfg) {
  PowerSample s;
  s.t_device_ms = static_cast<double>(frame.t_device_ms);
  s.t_mono_ms = t_mono_ms;
  s.adc_count = frame.adc_count;
  s.current_a = adc_to_current(frame.adc_count, cfg);
  s.power_w = s.current_a * cfg.supply_voltage;
  return s;
}

double integrate_energy(const PowerTrace& trace, Window window) {
  const auto& s = trace.samples;
  if (s.size() < 2) throw Error(ErrorCode::TooFewSamples, "power trace needs at least 2 samples");
  if (window.end_ms < window.start_ms || window.start_ms < s.front().t_mono_ms ||
      window.end_ms > s.back().t_mono_ms)
    throw Error(ErrorCode::WindowOutsideTrace,
                "window [" + csv::format_double(window.start_ms) + ", " +
                    csv::format_double(window.end_ms) + "] ms outside trace [" +
                    csv::format_double(s.front().t_mono_ms) + ", " +
                    csv::format_double(s.back().t_mono_ms) + "]");
  if (window.end_ms == window.start_ms) return 0.0;

  // Accumulate in watt-milliseconds and convert once.
  double acc = 0;
  double prev_t = window.start_ms;
  double prev_p = interpolate(s, window.start_ms);
  auto it = std::upper_bound(s.begin(), s.end(), window.start_ms,
                             [](double x, const PowerSample& p) { return x < p.t_mono_ms; });
  for (; it != s.end() && it->t_mono_ms < window.end_ms; ++it) {
    acc += 0.5 * (prev_p + it->power_w) * (it->t_mono_ms - prev_t);
    prev_t = it->t_mono_ms;
    prev_p = it->power_w;
  }
  const double end_p = interpolate(s, window.end_ms);
  acc += 0.5 * (prev_p + end_p) * (window.end_ms - prev_t);
  return acc / 1000.0;
}

PowerAggregates power_aggregates(const PowerTrace& trace, std::span<const Window> windows,
                                 std::optional<Window> span) {
  if (windows.empty()) throw Error(ErrorCode::Precondition, "no inference windows");
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].end_ms < windows[i].start_ms)
      throw Error(ErrorCode::Precondition, "inference window ends before it starts");
    if (i && windows[i].start_ms < windows[i - 1].end_ms)
      throw Error(ErrorCode::Precondition, "inference windows overlap");
  }
  auto mean_power = [&](Window w) {
    const double dur = w.end_ms - w.start_ms;
    if (dur <= 0) {
      integrate_energy(trace, w);  // bounds check
      return interpolate(trace.samples, w.start_ms);
    }
    return integrate_energy(trace, w) * 1000.0 / dur;
  };

  double sum_w = 0;
  for (const auto& w : windows) sum_w += mean_power(w);
  const Window whole = span.value_or(Window{windows.front().start_ms, windows.back().end_ms});

  PowerAggregates a;
  a.power_tot_kw = sum_w / 1000.0;
  a.power_per_inference_w = sum_w / static_cast<double>(windows.size());
  a.energy_tot_j = integrate_energy(trace, whole);
  a.mean_power_w = mean_power(whole);
  return a;
}

void write_power_csv(std::ostream& out, const PowerTrace& trace) {
  out << "t_device_ms,t_mono_ms,adc_count,current_a,power_w\n";
  for (const auto& s : trace.samples) {
    out << csv::format_double(s.t_device_ms) << ',' << csv::format_double(s.t_mono_ms) << ','
        << s.adc_count << ',' << csv::format_double(s.current_a) << ','
        << csv::format_double(s.power_w) << '\n';
  }
}

PowerTrace read_power_csv(std::string_view text, const SensorConfig& cfg) {
  auto records = csv::parse(text);
  if (records.empty() ||
      records[0].fields != std::vector<std::string>{"t_device_ms", "t_mono_ms", "adc_count",
                                                    "current_a", "power_w"})
    throw Error(ErrorCode::MalformedRow,
                "power header must be t_device_ms,t_mono_ms,adc_count,current_a,power_w", 1);
  PowerTrace trace;
  trace.config = cfg;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.fields.size() != 5) throw Error(ErrorCode::MalformedRow, "expected 5 fields", r.line);
    auto td = csv::parse_double(r.fields[0]);
    auto tm = csv::parse_double(r.fields[1]);
    auto adc = csv::parse_int(r.fields[2]);
    auto cur = csv::parse_double(r.fields[3]);
    auto pw = csv::parse_double(r.fields[4]);
    if (!td || !tm || !adc || !cur || !pw)
      throw Error(ErrorCode::MalformedRow, "unparseable power sample", r.line);
    if (!trace.samples.empty() && *tm < trace.samples.back().t_mono_ms)
      throw Error(ErrorCode::MalformedRow, "t_mono_ms decreases", r.line);
    trace.samples.push_back(PowerSample{*td, *tm, static_cast<int>(*adc), *cur, *pw});
  }
  return trace;
}

PowerTrace load_replay(std::string_view text, const SensorConfig& cfg, std::int64_t capture_start_us) {
  cfg.validate();
  PowerTrace trace;
  trace.config = cfg;
  std::optional<double> offset_ms;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    auto eol = text.find('\n');
    auto line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view() : text.substr(eol + 1);
    if (line.empty() || line == "\r") continue;
    Frame f;
    try {
      f = decode_frame(line, cfg);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()), line_no);
    }
    if (!offset_ms) offset_ms = us_to_ms(capture_start_us) - static_cast<double>(f.t_device_ms);
    const double t_mono = static_cast<double>(f.t_device_ms) + *offset_ms;
    if (!trace.samples.empty() && t_mono < trace.samples.back().t_mono_ms)
      throw Error(ErrorCode::MalformedFrame, "device clock went backwards", line_no);
    trace.samples.push_back(make_power_sample(f, t_mono, cfg));
  }
  return trace;
}

// ---------------------------------------------------------------------------

namespace {

speed_t baud_constant(int baud) {
  switch (baud) {
    case 1200: return B1200;
    case 2400: return B2400;
    case 4800: return B4800;
    case 9600: return B9600;
    case 19200: return B19200;
    case 38400: return B38400;
    case 57600: return B57600;
    case 115200: return B115200;
    case 230400: return B230400;
    default:
      throw Error(ErrorCode::InvalidConfig, "unsupported baud rate " + std::to_string(baud));
  }
}

}  // namespace

struct SerialCapture::State {
  std::string device;
  int baud = 9600;
  SensorConfig cfg;
  std::shared_ptr<Clock> clock;
  int fd = -1;
  std::atomic<bool> stop{false};
  std::atomic<std::size_t> malformed{0};
  std::thread worker;
  PowerTrace trace;
  std::optional<double> offset_ms;
  bool stopped = false;

  void handle_line(std::string_view line) {
    if (line.empty() || line == "\r") return;
    Frame f;
    try {
      f = decode_frame(line, cfg);
    } catch (const Error&) {
      ++malformed;
      return;
    }
    const double now_ms = us_to_ms(clock->now_us());
    if (!offset_ms) offset_ms = now_ms - static_cast<double>(f.t_device_ms);
    double t_mono = static_cast<double>(f.t_device_ms) + *offset_ms;
    if (!trace.samples.empty()) t_mono = std::max(t_mono, trace.samples.back().t_mono_ms);
    trace.samples.push_back(make_power_sample(f, t_mono, cfg));
  }

  void run() {
    std::string buf;
    bool first_line = true;  // the first line may be a partial frame
    char chunk[256];
    while (!stop) {
      pollfd p{fd, POLLIN, 0};
      int r = ::poll(&p, 1, 50);
      if (r <= 0) continue;
      ssize_t n = ::read(fd, chunk, sizeof(chunk));
      if (n <= 0) {
        if (n < 0 && errno == EINTR) continue;
        break;
      }
      buf.append(chunk, static_cast<std::size_t>(n));
      std::size_t pos;
      while ((pos = buf.find('\n')) != std::string::npos) {
        std::string line = buf.substr(0, pos);
        buf.erase(0, pos + 1);
        if (first_line) {
          first_line = false;
          try {
            decode_frame(line, cfg);
          } catch (const Error&) {
            continue;
          }
        }
        handle_line(line);
      }
    }
  }
};

SerialCapture::SerialCapture(std::string device, int baud, SensorConfig cfg, std::shared_ptr<Clock> clock)
    : state_(std::make_unique<State>()) {
  cfg.validate();
  state_->device = std::move(device);
  state_->baud = baud;
  state_->cfg = cfg;
  state_->trace.config = cfg;
  state_->clock = clock ? std::move(clock) : std::make_shared<SteadyClock>();
}

SerialCapture::~SerialCapture() {
  if (state_ && state_->worker.joinable()) {
    state_->stop = true;
    state_->worker.join();
  }
  if (state_ && state_->fd >= 0) ::close(state_->fd);
}

void SerialCapture::start() {
  auto& st = *state_;
  speed_t speed = baud_constant(st.baud);
  st.fd = ::open(st.device.c_str(), O_RDONLY | O_NOCTTY | O_NONBLOCK);
  if (st.fd < 0) throw Error(ErrorCode::IoError, "cannot open serial device " + st.device);
  termios tio{};
  if (::tcgetattr(st.fd, &tio) == 0) {
    ::cfmakeraw(&tio);
    ::cfsetispeed(&tio, speed);
    ::cfsetospeed(&tio, speed);
    tio.c_cflag |= CLOCAL | CREAD;
    ::tcsetattr(st.fd, TCSANOW, &tio);
  }
  st.worker = std::thread([&st] { st.run(); });
}

PowerTrace SerialCapture::stop() {
  auto& st = *state_;
  if (st.stopped) throw Error(ErrorCode::AlreadyStopped, "serial capture already stopped");
  st.stop = true;
  if (st.worker.joinable()) st.worker.join();
  st.stopped = true;
  return std::move(st.trace);
}

std::size_t SerialCapture::malformed_frames() const { return state_->malformed; }

}  // namespace edgemark
