#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "siagent/intent/intent.hpp"
#include "siagent/llm/backend.hpp"
#include "siagent/scene/scene.hpp"

namespace siagent::executor {

enum class StepKind { Movement, Trigger, NoOp };

std::string_view to_string(StepKind k);

struct MicroMotion {
    std::string pattern;
    double amplitude = 0.0;     // m
    double frequency_hz = 0.0;

    bool operator==(const MicroMotion&) const = default;
};

struct MovementOp {
    Pose goal;
    std::optional<MicroMotion> micro;

    bool operator==(const MovementOp&) const = default;
};

struct TriggerOp {
    std::string effect_id;

    bool operator==(const TriggerOp&) const = default;
};

/// Touches exactly one object.
struct ExecutionStep {
    StepKind kind = StepKind::NoOp;
    std::string target;
    std::optional<MovementOp> movement;
    std::optional<TriggerOp> trigger;

    static ExecutionStep move(std::string target, Pose goal, std::optional<MicroMotion> micro = std::nullopt);
    static ExecutionStep trig(std::string target, std::string effect_id);

    bool operator==(const ExecutionStep&) const = default;
};

struct ExecutionPlan {
    /// Empty for an intent that maps to no operation.
    std::vector<ExecutionStep> steps;
    intent::IntentCandidate source_intent;

    bool is_noop() const { return steps.empty(); }
};

// Plan grammar, one step per line:
//   MOVE <object> -> <x y z> <qx qy qz qw> [micro <pattern> <amp> <freq>]
//   TRIGGER <object> <effect_id>
//   NOOP
std::string format_step(const ExecutionStep& s);
std::string format_plan(const std::vector<ExecutionStep>& steps);
/// Blank lines, '#' comments and prose lines around the steps are ignored;
/// a line that starts with a keyword but is malformed throws ParseError.
std::vector<ExecutionStep> parse_plan(std::string_view text);

inline const std::vector<std::string> kMicroPatterns{"write_scribble", "pour_tilt_hold", "shake", "tap_burst"};

/// Throws PlanRejected naming the problem: unknown object, movement of an
/// immobile object, unknown effect, goal outside the scene bounds or not
/// finite, non-unit goal rotation, unknown micro pattern.
void validate_step(const ExecutionStep& s, const scene::SceneSnapshot& scene);
void validate_plan(const ExecutionPlan& p, const scene::SceneSnapshot& scene);

/// Rule-based planner keyed by canonical verb and object capabilities. Pure
/// function of (intent, scene). Throws PlanRejected when the intent names a
/// movement of an immobile object or a trigger the object does not offer.
ExecutionPlan deterministic_plan(const intent::IntentCandidate& intent, const scene::SceneSnapshot& scene);

/// Reach point in front of the user used when an object is fetched.
inline const Vec3 kReachPoint{0.2, 1.2, -0.4};
inline constexpr double kPourTiltDeg = 45.0;

struct PlanResult {
    ExecutionPlan plan;
    std::vector<llm::CallRecord> calls;
    double latency_ms = 0.0;
};

llm::SlotMap execution_slots(const intent::IntentCandidate& intent, const scene::SceneSnapshot& scene);

/// With a backend: prompt, parse, validate; one re-prompt on a parse error
/// or rejection, then PlanFailure. Without a backend: deterministic_plan.
PlanResult generate_plan(const intent::IntentCandidate& intent, const scene::SceneSnapshot& scene,
                         llm::Backend* backend);

}  // namespace siagent::executor
