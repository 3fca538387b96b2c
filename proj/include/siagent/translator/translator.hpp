#pragma once

#include <memory>
#include <string>
#include <vector>

#include "siagent/llm/backend.hpp"
#include "siagent/telemetry/types.hpp"
#include "siagent/translator/features.hpp"
#include "siagent/translator/hand_state.hpp"

namespace siagent::translator {

enum class DescriptionMode { Templated, Llm };

std::string_view to_string(DescriptionMode m);

/// The three channel descriptions handed to intent recognition, in the
/// order they are concatenated.
struct LinguisticBundle {
    std::string gaze;
    std::string hand;
    std::string finger;
    DescriptionMode source = DescriptionMode::Templated;

    bool operator==(const LinguisticBundle&) const = default;
};

struct Translation {
    GazeFeature gaze;
    HandMotionFeature hands;
    FingerFeature fingers;
    LinguisticBundle bundle;
    std::vector<llm::CallRecord> calls;
    /// Sum of description call latencies; 0 in templated mode.
    double latency_ms = 0.0;
};

std::string describe_gaze(const GazeFeature& f);
std::string describe_hands(const HandMotionFeature& f);
std::string describe_fingers(const FingerFeature& f);

/// Compact qualitative feature text used as LLM prompt slots. Carries no raw
/// coordinates, so equal features give equal fingerprints.
std::string gaze_slot(const GazeFeature& f);
std::string hand_slot(const HandMotionFeature& f);
std::string finger_slot(const FingerFeature& f);

/// Raw downsampled records as text, positions relative to the window origin.
std::string gaze_points_text(const std::vector<telemetry::TelemetryFrame>& points);
std::string hand_points_text(const std::vector<telemetry::TelemetryFrame>& points, const Vec3& origin);
std::string finger_points_text(const std::vector<telemetry::TelemetryFrame>& points);

class Translator {
public:
    explicit Translator(TranslatorConfig cfg = {}, DescriptionMode mode = DescriptionMode::Templated,
                        std::shared_ptr<llm::Backend> backend = nullptr,
                        HandStateRules rules = HandStateRules::defaults());

    /// In LLM mode, fall back to templated text when the backend fails with
    /// BackendError or BackendTimeout instead of propagating.
    void set_fallback_on_backend_error(bool on) { fallback_ = on; }

    /// Downsamples, extracts the three features and describes them. Throws
    /// EmptyWindow or InsufficientData for degenerate windows; backend errors
    /// propagate in LLM mode.
    Translation translate(const telemetry::DemonstrationWindow& window) const;

    const TranslatorConfig& config() const { return cfg_; }
    DescriptionMode mode() const { return mode_; }

private:
    TranslatorConfig cfg_;
    DescriptionMode mode_;
    std::shared_ptr<llm::Backend> backend_;
    HandStateRules rules_;
    bool fallback_ = false;
};

}  // namespace siagent::translator
