#include "siagent/service/session.hpp"

#include <array>

#include <fmt/format.h>

#include "siagent/core/error.hpp"

namespace siagent::service {

namespace {

constexpr std::array<std::string_view, 8> kStageNames{"Idle",       "Demonstrating", "Translating", "Recognizing",
                                                      "Confirming", "Executing",     "Done",        "Failed"};

}  // namespace

std::string_view to_string(Stage s) { return kStageNames[static_cast<std::size_t>(s)]; }

Stage stage_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kStageNames.size(); ++i)
        if (kStageNames[i] == s) return static_cast<Stage>(i);
    throw ConfigError(fmt::format("unknown stage '{}'", s));
}

std::string_view to_string(StageEvent e) {
    switch (e) {
        case StageEvent::StartDemonstration: return "start";
        case StageEvent::WindowSealed: return "window_sealed";
        case StageEvent::Translated: return "translated";
        case StageEvent::Recognized: return "recognized";
        case StageEvent::Confirmed: return "confirmed";
        case StageEvent::Rejected: return "rejected";
        case StageEvent::Executed: return "executed";
        case StageEvent::Fail: return "fail";
    }
    return "fail";
}

std::optional<Stage> next_stage(Stage from, StageEvent e) {
    using S = Stage;
    using E = StageEvent;
    if (e == E::Fail) return from == S::Done || from == S::Failed ? std::nullopt : std::optional(S::Failed);
    switch (from) {
        case S::Idle: return e == E::StartDemonstration ? std::optional(S::Demonstrating) : std::nullopt;
        case S::Demonstrating: return e == E::WindowSealed ? std::optional(S::Translating) : std::nullopt;
        case S::Translating: return e == E::Translated ? std::optional(S::Recognizing) : std::nullopt;
        case S::Recognizing: return e == E::Recognized ? std::optional(S::Confirming) : std::nullopt;
        case S::Confirming:
            if (e == E::Confirmed) return S::Executing;
            if (e == E::Rejected) return S::Demonstrating;
            return std::nullopt;
        case S::Executing: return e == E::Executed ? std::optional(S::Done) : std::nullopt;
        case S::Done:
        case S::Failed: return std::nullopt;
    }
    return std::nullopt;
}

Stage StageMachine::fire(StageEvent e, double now_ms) {
    auto to = next_stage(stage_, e);
    if (!to) throw Conflict(fmt::format("'{}' is not allowed while {}", to_string(e), to_string(stage_)));
    double spent = now_ms - entered_ms_;
    if (stage_ == Stage::Demonstrating) ledger_.u_ms += spent;
    if (stage_ == Stage::Confirming) ledger_.i_ms += spent;
    history_.push_back({stage_, *to, e, now_ms});
    stage_ = *to;
    entered_ms_ = now_ms;
    return stage_;
}

}  // namespace siagent::service
