#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "siagent/core/error.hpp"
#include "siagent/telemetry/types.hpp"
#include "siagent/telemetry/window.hpp"

namespace siagent::telemetry {

std::string_view to_string(Hand hand) { return hand == Hand::Left ? "left" : "right"; }

namespace {

// Records pass through 6-decimal text, so unit-norm checks allow for that
// quantization.
constexpr double kQuatTolerance = 1e-5;

void validate_hand(const HandSample& s, Hand expected, std::uint64_t seq) {
    if (s.pose.hand != expected || s.fingers.hand != expected) {
        throw InvalidRecord(fmt::format("frame {}: {} hand record tagged with the wrong side", seq, to_string(expected)));
    }
    if (!s.pose.palm_position.allFinite()) {
        throw InvalidRecord(fmt::format("frame {}: non-finite {} palm position", seq, to_string(expected)));
    }
    if (!is_unit(s.pose.palm_rotation, kQuatTolerance)) {
        throw InvalidRecord(fmt::format("frame {}: {} palm rotation is not a unit quaternion", seq, to_string(expected)));
    }
    for (std::size_t i = 0; i < 5; ++i) {
        const double f = s.fingers.flexion[i];
        const double c = s.fingers.curl[i];
        if (!(f >= 0.0 && f <= 1.0) || !(c >= 0.0 && c <= 1.0)) {
            throw InvalidRecord(fmt::format("frame {}: {} finger {} joint value outside [0,1]", seq, to_string(expected), i));
        }
    }
}

}  // namespace

void validate(const TelemetryFrame& frame) {
    const auto& g = frame.gaze;
    if (g.fixating != g.target_name.has_value()) {
        throw InvalidRecord(fmt::format("frame {}: target name must be present iff fixating", frame.seq));
    }
    if (g.target_name && g.target_name->empty()) {
        throw InvalidRecord(fmt::format("frame {}: empty target name", frame.seq));
    }
    if (g.timestamp_ms < 0 || g.timestamp_ms > kWindowDurationMs) {
        throw InvalidRecord(fmt::format("frame {}: timestamp {} ms outside the window", frame.seq, g.timestamp_ms));
    }
    if (!frame.head_position.allFinite()) throw InvalidRecord(fmt::format("frame {}: non-finite head position", frame.seq));
    validate_hand(frame.left, Hand::Left, frame.seq);
    validate_hand(frame.right, Hand::Right, frame.seq);
}

DemonstrationWindow::DemonstrationWindow(std::vector<TelemetryFrame> frames)
    : frames_(std::move(frames)), origin_(frames_.empty() ? Vec3::Zero() : frames_.front().head_position) {}

DemonstrationWindow::DemonstrationWindow(std::vector<TelemetryFrame> frames, Vec3 origin_head_position)
    : frames_(std::move(frames)), origin_(std::move(origin_head_position)) {}

bool DemonstrationWindow::is_complete() const {
    return frames_.size() >= kMinWindowFrames && frames_.size() <= kNominalWindowFrames;
}

std::int64_t DemonstrationWindow::duration_ms() const {
    return static_cast<std::int64_t>(std::llround(static_cast<double>(frames_.size()) * kFramePeriodMs));
}

std::vector<TelemetryFrame> downsample(const DemonstrationWindow& window, std::size_t stride) {
    if (window.empty()) throw EmptyWindow("cannot downsample an empty window");
    if (stride == 0) throw std::invalid_argument("stride must be positive");
    std::vector<TelemetryFrame> out;
    out.reserve((window.size() - 1) / stride + 1);
    for (std::size_t i = 0; i < window.size(); i += stride) out.push_back(window.frames()[i]);
    return out;
}

void WindowAssembler::start() {
    collecting_ = true;
    first_seq_.reset();
    frames_.clear();
}

std::optional<DemonstrationWindow> WindowAssembler::push(const TelemetryFrame& frame) {
    if (!collecting_) return std::nullopt;
    if (!first_seq_) first_seq_ = frame.seq;
    if (frame.seq < *first_seq_) return std::nullopt;
    if (frame.seq - *first_seq_ >= kNominalWindowFrames) {
        if (frames_.size() >= kMinWindowFrames) return seal();
        // Too many frames lost: restart the span from this frame.
        first_seq_ = frame.seq;
        frames_.clear();
    }
    frames_.push_back(frame);
    if (frame.seq - *first_seq_ + 1 == kNominalWindowFrames) return seal();
    return std::nullopt;
}

DemonstrationWindow WindowAssembler::stop() {
    if (!collecting_) throw WindowIncomplete("no demonstration in progress");
    if (frames_.size() < kMinWindowFrames) {
        const auto n = frames_.size();
        collecting_ = false;
        frames_.clear();
        first_seq_.reset();
        throw WindowIncomplete(fmt::format("window has {} frames, need at least {}", n, kMinWindowFrames));
    }
    return seal();
}

DemonstrationWindow WindowAssembler::seal() {
    collecting_ = false;
    first_seq_.reset();
    DemonstrationWindow w(std::move(frames_));
    frames_.clear();
    return w;
}

}  // namespace siagent::telemetry
