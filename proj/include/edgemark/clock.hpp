#pragma once

#include <cstdint>

namespace edgemark {

/// Harness time source. All timestamps are integer microseconds so that
/// differences (latencies, window lengths) are exact.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_us() const = 0;
  /// Blocks (real clock) or advances virtual time (simulated clock).
  virtual void sleep_us(std::int64_t us) = 0;
  virtual bool simulated() const = 0;
};

/// std::chrono::steady_clock relative to the first use in this process.
class SteadyClock final : public Clock {
 public:
  std::int64_t now_us() const override;
  void sleep_us(std::int64_t us) override;
  bool simulated() const override { return false; }
};

class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(std::int64_t start_us = 0) : now_(start_us) {}
  std::int64_t now_us() const override { return now_; }
  void sleep_us(std::int64_t us) override { advance(us); }
  bool simulated() const override { return true; }
  void advance(std::int64_t us) {
    if (us > 0) now_ += us;
  }

 private:
  std::int64_t now_;
};

inline double us_to_ms(std::int64_t us) { return static_cast<double>(us) / 1000.0; }
inline double us_to_s(std::int64_t us) { return static_cast<double>(us) / 1e6; }

}  // namespace edgemark
