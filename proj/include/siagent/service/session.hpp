#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace siagent::service {

enum class Stage { Idle, Demonstrating, Translating, Recognizing, Confirming, Executing, Done, Failed };

std::string_view to_string(Stage s);
/// Throws ConfigError.
Stage stage_from_string(std::string_view s);

enum class StageEvent {
    StartDemonstration,
    WindowSealed,
    Translated,
    Recognized,
    Confirmed,
    /// "none of these": back to a fresh demonstration
    Rejected,
    Executed,
    Fail,
};

std::string_view to_string(StageEvent e);

/// The declared transition graph. nullopt means the event is not allowed in
/// that stage.
std::optional<Stage> next_stage(Stage from, StageEvent e);

struct Transition {
    Stage from;
    Stage to;
    StageEvent event;
    double at_ms;
};

/// U is time spent in Demonstrating, I time in Confirming. L and A are
/// accumulated from call latencies and the agent run.
struct TimingLedger {
    double u_ms = 0.0;
    double l_ms = 0.0;
    double i_ms = 0.0;
    double a_ms = 0.0;

    double agt() const { return u_ms + l_ms + i_ms + a_ms; }
};

/// Stage bookkeeping for one session. Not thread-safe; the owning session
/// serializes access.
class StageMachine {
public:
    explicit StageMachine(double now_ms = 0.0) : entered_ms_(now_ms) {}

    Stage stage() const { return stage_; }
    /// Throws Conflict and leaves the stage alone if the event is not
    /// allowed.
    Stage fire(StageEvent e, double now_ms);
    bool can_fire(StageEvent e) const { return next_stage(stage_, e).has_value(); }

    void add_latency(double ms) { ledger_.l_ms += ms; }
    void add_execution(double ms) { ledger_.a_ms += ms; }

    const TimingLedger& ledger() const { return ledger_; }
    const std::vector<Transition>& history() const { return history_; }
    double entered_ms() const { return entered_ms_; }

private:
    Stage stage_ = Stage::Idle;
    double entered_ms_;
    TimingLedger ledger_;
    std::vector<Transition> history_;
};

}  // namespace siagent::service
