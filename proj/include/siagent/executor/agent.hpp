#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "siagent/core/clock.hpp"
#include "siagent/executor/plan.hpp"
#include "siagent/scene/scene.hpp"

namespace siagent::executor {

/// Superimposes a bounded periodic offset on a sampled path. The offset is
/// perpendicular to the path for write_scribble, vertical otherwise, has
/// magnitude at most `amplitude`, and fades in and out so both endpoints are
/// unchanged. Throws PatternError for an unknown pattern.
std::vector<Vec3> micro_motion(std::string_view pattern, const std::vector<Vec3>& base, double amplitude,
                               double frequency_hz, double dt_ms);

struct ExecutionConfig {
    double timeout_ms = 30000.0;
    double speed_mps = 0.6;
    double tick_hz = 30.0;
    double tap_ms = 300.0;
    Vec3 hand_home{0.25, 1.2, -0.3};
};

enum class RunStatus { Succeeded, TimedOut, Aborted, Failed };

std::string_view to_string(RunStatus s);

struct TrajectorySample {
    double t_ms = 0.0;
    Vec3 hand = Vec3::Zero();
    std::optional<std::string> holding;
};

struct StepRecord {
    ExecutionStep step;
    double elapsed_ms = 0.0;
    bool completed = false;
};

struct ProgressEvent {
    std::size_t step_index = 0;
    std::size_t step_count = 0;
    /// approach, carry, tap, effect, step_done, finished
    std::string phase;
    double t_ms = 0.0;
    Vec3 hand = Vec3::Zero();
    std::string detail;
};

struct AgentRun {
    RunStatus status = RunStatus::Succeeded;
    std::vector<StepRecord> steps;
    std::vector<TrajectorySample> trajectory;
    scene::SceneSnapshot final_scene;
    double elapsed_ms = 0.0;
    std::string message;
};

using ProgressSink = std::function<void(const ProgressEvent&)>;

/// Runs the plan tick by tick against the scene owner. Scene changes are
/// published when a step completes, so a timed-out or aborted run leaves the
/// state of the last completed step. Cancellation is checked between ticks.
AgentRun execute(const ExecutionPlan& plan, scene::SceneOwner& owner, Clock& clock, const ExecutionConfig& cfg = {},
                 const ProgressSink& on_progress = {}, const std::atomic<bool>* cancel = nullptr);

/// Applies every step's effect directly to a snapshot, no motion.
scene::SceneSnapshot replay_steps(const scene::SceneSnapshot& initial, const std::vector<ExecutionStep>& steps);

}  // namespace siagent::executor
