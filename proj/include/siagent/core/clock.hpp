#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace siagent {

/// Millisecond clock used wherever the pipeline measures or paces time.
/// Tests substitute SimulatedClock so timeouts run instantly.
class Clock {
public:
    virtual ~Clock() = default;
    virtual double now_ms() const = 0;
    virtual void sleep_ms(double ms) = 0;
};

class SteadyClock final : public Clock {
public:
    double now_ms() const override;
    void sleep_ms(double ms) override;
};

/// Time advances only through sleep_ms() or advance().
class SimulatedClock final : public Clock {
public:
    explicit SimulatedClock(double start_ms = 0.0) : now_(start_ms) {}

    double now_ms() const override { return now_.load(); }
    void sleep_ms(double ms) override { advance(ms); }
    void advance(double ms);

private:
    std::atomic<double> now_;
};

}  // namespace siagent
