#pragma once

#include <optional>
#include <string_view>

namespace siagent::telemetry {

/// Natural hand configurations observed during hand-object interaction.
enum class HandState { Open, HalfGrip, TightGrip, TipPinch, IndexTap, Unknown };

std::string_view to_string(HandState s);
/// Human wording used in descriptions ("half-grip", "tip pinch", ...).
std::string_view describe(HandState s);
std::optional<HandState> hand_state_from_string(std::string_view s);

}  // namespace siagent::telemetry
