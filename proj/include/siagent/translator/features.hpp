#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "siagent/telemetry/types.hpp"

namespace siagent::translator {

struct TranslatorConfig {
    std::size_t stride = telemetry::kDefaultStride;
    /// Gaze runs shorter than this many points are absorbed by a neighbor.
    std::size_t min_fixation_run = 2;
    /// Net displacement below this (m, per axis) gets no direction label.
    double dead_zone_m = 0.05;
    /// Distance change below this (m) is reported as steady.
    double trend_dead_zone_m = 0.10;
    double rotation_threshold_deg = 45.0;
    /// Joint value at or above the threshold counts as bent.
    std::array<double, 5> flex_threshold{0.5, 0.5, 0.5, 0.5, 0.5};
    std::array<double, 5> curl_threshold{0.5, 0.5, 0.5, 0.5, 0.5};
};

enum class GazePattern { ContinuousOnA, ShiftAtoB, ShiftAtoNone, NoFixation, Other };

std::string_view to_string(GazePattern p);

/// Inclusive range of downsampled point indices with one gaze target.
struct GazeSegment {
    std::optional<std::string> target;
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t length() const { return last - first + 1; }
    bool operator==(const GazeSegment&) const = default;
};

struct GazeFeature {
    /// Contiguous, non-overlapping, covering every point.
    std::vector<GazeSegment> segments;
    GazePattern pattern = GazePattern::NoFixation;

    /// Fixated targets in order of appearance, adjacent repeats collapsed.
    std::vector<std::string> targets() const;
    bool operator==(const GazeFeature&) const = default;
};

/// Throws EmptyWindow if there are no points.
GazeFeature extract_gaze(const std::vector<telemetry::TelemetryFrame>& points, const TranslatorConfig& cfg = {});

enum class Trend { Closer, Farther, Steady };

std::string_view to_string(Trend t);

struct HandMotion {
    telemetry::Hand hand = telemetry::Hand::Right;
    /// Body frame: axes aligned with the world, origin at the window's first
    /// head position.
    Vec3 net_displacement = Vec3::Zero();
    /// -1 / 0 / +1 per axis (x right, y up, z backward) after the dead zone.
    std::array<int, 3> direction{};
    double cumulative_rotation_deg = 0.0;
    bool rotation_significant = false;

    bool moved() const { return direction != std::array<int, 3>{}; }
};

struct HandMotionFeature {
    HandMotion left;
    HandMotion right;
    Trend inter_hand = Trend::Steady;
    double inter_hand_delta_m = 0.0;
    Trend left_to_head = Trend::Steady;
    Trend right_to_head = Trend::Steady;
    double left_to_head_delta_m = 0.0;
    double right_to_head_delta_m = 0.0;

    const HandMotion& hand(telemetry::Hand h) const { return h == telemetry::Hand::Left ? left : right; }
};

/// Throws InsufficientData with fewer than two points.
HandMotionFeature extract_hand_motion(const std::vector<telemetry::TelemetryFrame>& points, const Vec3& origin,
                                      const TranslatorConfig& cfg = {});

/// Labels like "right-to-left", "upward", "forward" for the non-zero axes.
std::vector<std::string> direction_labels(const std::array<int, 3>& direction);

}  // namespace siagent::translator
