#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "siagent/scene/scene.hpp"
#include "siagent/telemetry/hand_state.hpp"
#include "siagent/telemetry/types.hpp"

namespace siagent::telemetry {

struct GazeSegmentSpec {
    std::optional<std::string> target;  // nullopt: looking at nothing
    std::size_t frames = 0;
};

/// Scripted motion of one hand over the window, in the body frame
/// (origin = head at window start; +x right, +y up, -z forward).
struct HandMotionSpec {
    Vec3 start_offset = Vec3::Zero();
    Vec3 displacement = Vec3::Zero();
    /// Small periodic palm translation that leaves the net displacement alone.
    Vec3 wobble = Vec3::Zero();
    double wobble_hz = 0.0;
    Vec3 rotation_axis = Vec3::UnitZ();
    double rotation_deg = 0.0;
    double oscillation_deg = 0.0;
    double oscillation_hz = 0.0;
    /// (first frame, shape) pairs in frame order; the first entry should
    /// start at frame 0.
    std::vector<std::pair<std::size_t, HandState>> shapes{{0, HandState::Open}};
};

/// Ground truth the feature extractors must recover from a synthesized
/// window.
struct DeclaredFeatures {
    std::vector<std::string> gaze_targets;  // in order of appearance
    /// -1 / 0 / +1 per body axis (x right, y up, z backward).
    std::array<int, 3> left_direction{};
    std::array<int, 3> right_direction{};
    bool left_rotation_significant = false;
    bool right_rotation_significant = false;
    HandState left_final = HandState::Open;
    HandState right_final = HandState::Open;
};

struct MotionTemplate {
    std::string id;
    Vec3 head_position{0.0, 1.6, 0.0};
    std::vector<GazeSegmentSpec> gaze;
    HandMotionSpec left;
    HandMotionSpec right;
    std::size_t frames = kNominalWindowFrames;
    DeclaredFeatures expected;
};

/// Builds a template from an id of the form "<archetype>@<ObjectA>[+<ObjectB>]"
/// or one of the named aliases ("pour-right-to-left", "static-gaze-lamp",
/// "index-tap-lamp"). Object positions shape gaze and reach directions.
/// Throws UnknownTarget for objects missing from the scene and ConfigError
/// for an unknown archetype.
MotionTemplate resolve_template(std::string_view id, const scene::SceneSnapshot& scene);

std::vector<std::string> template_archetypes();

/// Deterministic synthetic demonstration: a pure function of (template,
/// scene, seed). Gaze targets are resolved through the scene geometry.
/// Throws UnknownTarget if a gaze target is not in the scene.
DemonstrationWindow synthesize_demo(const MotionTemplate& tmpl, const scene::SceneSnapshot& scene,
                                    std::uint64_t jitter_seed, std::uint64_t first_seq = 0);

}  // namespace siagent::telemetry
