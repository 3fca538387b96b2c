#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "siagent/telemetry/hand_state.hpp"
#include "siagent/telemetry/types.hpp"
#include "siagent/translator/features.hpp"

namespace siagent::translator {

using telemetry::HandState;

/// Binary bend state per finger, thumb first. true = bent.
struct FingerStateVector {
    std::array<bool, 5> flex{};
    std::array<bool, 5> curl{};

    std::string flex_bits() const;
    std::string curl_bits() const;
    bool operator==(const FingerStateVector&) const = default;
};

FingerStateVector encode(const telemetry::FingerJointRecord& joints, const TranslatorConfig& cfg = {});

/// One row of the lookup table. Patterns are five characters of '1' (bent),
/// '0' (extended) or 'x' (either).
struct HandStateRule {
    HandState state = HandState::Unknown;
    std::string flex_pattern = "xxxxx";
    std::string curl_pattern = "xxxxx";
    /// Extra condition: at least this many distal joints extended.
    std::optional<int> min_curl_extended;

    bool matches(const FingerStateVector& v) const;
};

/// Ordered rule table; the first matching rule wins, Unknown otherwise.
class HandStateRules {
public:
    HandStateRules() = default;
    explicit HandStateRules(std::vector<HandStateRule> rules);

    /// Line format: "<State> <flex> <curl> [curl_extended>=N]"; '#' comments.
    static HandStateRules parse(std::string_view text);
    static HandStateRules load(const std::filesystem::path& path);
    /// data/hand_states.rules, loaded once.
    static const HandStateRules& defaults();

    HandState classify(const FingerStateVector& v) const;
    const std::vector<HandStateRule>& rules() const { return rules_; }

private:
    std::vector<HandStateRule> rules_;
};

struct HandStateSummary {
    HandState initial = HandState::Unknown;
    HandState final_state = HandState::Unknown;
    /// Per-point states with consecutive repeats collapsed; starts with
    /// initial and ends with final_state.
    std::vector<HandState> transitions;
};

struct FingerFeature {
    HandStateSummary left;
    HandStateSummary right;
    std::vector<FingerStateVector> left_vectors;
    std::vector<FingerStateVector> right_vectors;

    const HandStateSummary& hand(telemetry::Hand h) const { return h == telemetry::Hand::Left ? left : right; }
};

/// Throws EmptyWindow if there are no points.
FingerFeature extract_finger_states(const std::vector<telemetry::TelemetryFrame>& points,
                                    const HandStateRules& rules, const TranslatorConfig& cfg = {});

}  // namespace siagent::translator
