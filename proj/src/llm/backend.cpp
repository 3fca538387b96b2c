#include "siagent/llm/backend.hpp"

#include <chrono>

#include "siagent/core/text.hpp"

namespace siagent::llm {

namespace {
constexpr std::string_view kStageNames[] = {"GazeDesc", "HandDesc", "FingerDesc", "Intent", "Execution"};
constexpr std::string_view kOutcomeNames[] = {"Ok", "Retried", "Timeout", "Error", "MockMiss"};
}  // namespace

std::string_view to_string(Stage s) { return kStageNames[static_cast<int>(s)]; }

std::optional<Stage> stage_from_string(std::string_view s) {
    for (int i = 0; i < 5; ++i)
        if (text::iequals(kStageNames[i], s)) return static_cast<Stage>(i);
    return std::nullopt;
}

std::string_view to_string(Outcome o) { return kOutcomeNames[static_cast<int>(o)]; }

std::string fingerprint(Stage stage, const SlotMap& slots) {
    std::string buf(to_string(stage));
    for (const auto& [k, v] : slots) {
        buf.push_back('\0');
        buf += k;
        buf.push_back('=');
        buf += v;
    }
    return text::hex64(text::fnv1a64(buf));
}

std::int64_t wall_clock_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace siagent::llm
