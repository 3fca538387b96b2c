#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "siagent/core/geometry.hpp"

namespace siagent::scene {

/// State literal for objects without distinguishable states.
inline constexpr std::string_view kNoSpecialState = "no special state";

struct EffectSpec {
    std::string effect_id;
    std::string description;
    std::optional<std::string> resulting_state;

    bool operator==(const EffectSpec&) const = default;
};

struct SceneObject {
    std::string name;
    Pose pose;
    double bounding_radius = 0.1;
    bool mobile = false;
    std::string state{kNoSpecialState};
    std::vector<EffectSpec> effects;

    /// States this object may take: its current state plus every state an
    /// effect can produce. "no special state" is always accepted.
    std::vector<std::string> declared_states() const;
    bool accepts_state(std::string_view s) const;
    const EffectSpec* find_effect(std::string_view effect_id) const;

    bool operator==(const SceneObject&) const = default;
};

struct Bounds {
    Vec3 min;
    Vec3 max;

    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
};

/// Immutable set of scene objects. Every mutation returns a new snapshot with
/// a bumped version.
class SceneSnapshot {
public:
    SceneSnapshot() = default;
    /// Throws StateError on duplicate names, non-positive radius, or a state
    /// outside the declared set.
    SceneSnapshot(std::string id, std::vector<SceneObject> objects, std::uint64_t version = 0);

    const std::string& id() const { return id_; }
    std::uint64_t version() const { return version_; }
    const std::vector<SceneObject>& objects() const { return objects_; }

    const SceneObject* find(std::string_view name) const;
    /// Case-insensitive lookup.
    const SceneObject* find_ci(std::string_view name) const;
    const SceneObject& at(std::string_view name) const;

    /// Axis-aligned box around all objects and the user origin, inflated by
    /// a margin. Movement goals must fall inside it.
    Bounds bounds(double margin = 0.5) const;

    SceneSnapshot with_object(SceneObject replacement) const;
    SceneSnapshot scaled(double k) const;

    bool operator==(const SceneSnapshot&) const = default;

private:
    std::string id_;
    std::uint64_t version_ = 0;
    std::vector<SceneObject> objects_;
};

/// Object-level gaze resolution. An object qualifies if the gaze ray hits its
/// bounding sphere or passes within `angular_tolerance_deg` of its center;
/// the qualifying object nearest along the ray wins. Throws InvalidDirection
/// if `gaze_direction` is not unit length.
std::optional<std::string> resolve_gaze_target(const Vec3& head_position, const Vec3& gaze_direction,
                                               const SceneSnapshot& scene,
                                               double angular_tolerance_deg = 3.0);

/// Throws StateError for an unknown object or a state outside its declared set.
SceneSnapshot apply_state_change(const SceneSnapshot& scene, std::string_view object,
                                 std::string_view new_state);

SceneSnapshot apply_pose_change(const SceneSnapshot& scene, std::string_view object, const Pose& pose);

// Scene files: header "SIAGENT-SCENE v1 <id>", then one "O ..." line per object.
SceneSnapshot parse_scene(std::string_view text);
std::string format_scene(const SceneSnapshot& scene);
SceneSnapshot load_scene(const std::filesystem::path& path);
void save_scene(const SceneSnapshot& scene, const std::filesystem::path& path);

/// Loads data/scenes/<id>.scene.
SceneSnapshot load_fixture_scene(std::string_view id);

struct ValidationIssue {
    std::size_t line;
    std::string message;
};

/// Like parse_scene, but collects every problem instead of stopping at the
/// first. Empty result means the file is valid.
std::vector<ValidationIssue> validate_scene_text(std::string_view text);

/// Single writer of scene state. Readers take snapshots; writers publish new
/// versions under the lock.
class SceneOwner {
public:
    explicit SceneOwner(SceneSnapshot initial);

    SceneSnapshot snapshot() const;
    SceneSnapshot apply_state(std::string_view object, std::string_view state);
    SceneSnapshot apply_pose(std::string_view object, const Pose& pose);
    void reset(SceneSnapshot s);

    bool available() const;
    void set_available(bool available);

private:
    mutable std::mutex mutex_;
    SceneSnapshot current_;
    bool available_ = true;
};

}  // namespace siagent::scene
