#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "siagent/core/geometry.hpp"

namespace siagent::telemetry {

inline constexpr double kFrameRateHz = 30.0;
inline constexpr double kFramePeriodMs = 1000.0 / kFrameRateHz;
inline constexpr std::int64_t kWindowDurationMs = 3000;
inline constexpr std::size_t kNominalWindowFrames = 90;
/// Windows with a few dropped packets are still processed.
inline constexpr std::size_t kMinWindowFrames = 85;
inline constexpr std::size_t kDefaultStride = 5;

enum class Hand { Left, Right };

std::string_view to_string(Hand hand);

struct GazeRecord {
    std::int64_t timestamp_ms = 0;
    bool fixating = false;
    /// Present iff fixating.
    std::optional<std::string> target_name;

    bool operator==(const GazeRecord&) const = default;
};

struct HandPoseRecord {
    Hand hand = Hand::Right;
    Vec3 palm_position = Vec3::Zero();
    Quat palm_rotation = Quat::Identity();

    bool operator==(const HandPoseRecord& o) const {
        return hand == o.hand && palm_position == o.palm_position &&
               palm_rotation.coeffs() == o.palm_rotation.coeffs();
    }
};

/// Normalized joint bends, thumb first: thumb, index, middle, ring, pinky.
struct FingerJointRecord {
    Hand hand = Hand::Right;
    std::array<double, 5> flexion{};  // metacarpophalangeal joint
    std::array<double, 5> curl{};     // distal joints

    bool operator==(const FingerJointRecord&) const = default;
};

struct HandSample {
    HandPoseRecord pose;
    FingerJointRecord fingers;

    bool operator==(const HandSample&) const = default;
};

struct TelemetryFrame {
    std::uint64_t seq = 0;
    GazeRecord gaze;
    HandSample left;
    HandSample right;
    Vec3 head_position = Vec3::Zero();

    const HandSample& hand(Hand h) const { return h == Hand::Left ? left : right; }

    bool operator==(const TelemetryFrame& o) const {
        return seq == o.seq && gaze == o.gaze && left == o.left && right == o.right &&
               head_position == o.head_position;
    }
};

/// Throws InvalidRecord if any record invariant is broken (target name vs
/// fixation flag, unit quaternions, finite positions, joint values in [0,1]).
void validate(const TelemetryFrame& frame);

/// Immutable once constructed; safe to hand across threads.
class DemonstrationWindow {
public:
    DemonstrationWindow() = default;
    /// Origin defaults to the head position of the first frame.
    explicit DemonstrationWindow(std::vector<TelemetryFrame> frames);
    DemonstrationWindow(std::vector<TelemetryFrame> frames, Vec3 origin_head_position);

    const std::vector<TelemetryFrame>& frames() const { return frames_; }
    const Vec3& origin_head_position() const { return origin_; }
    std::size_t size() const { return frames_.size(); }
    bool empty() const { return frames_.empty(); }

    /// True when the frame count is within the accepted 85-90 range.
    bool is_complete() const;
    /// Span covered by the frames at the nominal rate, ms.
    std::int64_t duration_ms() const;

    bool operator==(const DemonstrationWindow& o) const {
        return frames_ == o.frames_ && origin_ == o.origin_;
    }

private:
    std::vector<TelemetryFrame> frames_;
    Vec3 origin_ = Vec3::Zero();
};

/// Frames at indices 0, stride, 2*stride, ... Throws EmptyWindow on an empty
/// window and std::invalid_argument on stride 0.
std::vector<TelemetryFrame> downsample(const DemonstrationWindow& window, std::size_t stride = kDefaultStride);

}  // namespace siagent::telemetry
