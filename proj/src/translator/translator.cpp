#include "siagent/translator/translator.hpp"

#include <fmt/format.h>

#include "siagent/core/error.hpp"
#include "siagent/core/text.hpp"
#include "siagent/llm/prompt.hpp"

namespace siagent::translator {

using telemetry::Hand;

namespace {

std::string hand_name(Hand h) { return h == Hand::Left ? "left" : "right"; }

std::string held_phrase(HandState s) {
    switch (s) {
        case HandState::Open: return "open";
        case HandState::IndexTap: return "in an index tap";
        case HandState::Unknown: return "in an unrecognized shape";
        default: return "in a " + std::string(telemetry::describe(s));
    }
}

std::string sentence_for(const HandMotion& m) {
    auto labels = direction_labels(m.direction);
    std::string s = "The " + hand_name(m.hand) + " hand ";
    if (!labels.empty())
        s += "moves " + text::join(labels, " and ") + " relative to the body";
    else
        s += "stays in place";
    if (m.rotation_significant) s += " while rotating significantly";
    return s + ".";
}

std::string fingers_sentence(Hand h, const HandStateSummary& s) {
    std::string out = "The " + hand_name(h) + " hand ";
    if (s.transitions.size() == 1) return out + "stays " + held_phrase(s.initial) + " throughout.";
    std::vector<std::string> names;
    for (auto st : s.transitions) names.emplace_back(telemetry::describe(st));
    return out + "goes from " + text::join(names, " to ") + ".";
}

std::string states_compact(const HandStateSummary& s) {
    std::vector<std::string> names;
    for (auto st : s.transitions) names.emplace_back(telemetry::to_string(st));
    return text::join(names, ">");
}

std::string motion_compact(const HandMotion& m) {
    auto labels = direction_labels(m.direction);
    std::string s = labels.empty() ? "no net motion" : text::join(labels, "+");
    if (m.rotation_significant) s += ", rotation significant";
    return s;
}

std::string f3(double v) {
    auto s = fmt::format("{:.3f}", v);
    return s == "-0.000" ? "0.000" : s;
}

std::string vec_text(const Vec3& v) { return f3(v.x()) + " " + f3(v.y()) + " " + f3(v.z()); }

}  // namespace

std::string_view to_string(DescriptionMode m) { return m == DescriptionMode::Llm ? "LLM" : "Templated"; }

std::string gaze_points_text(const std::vector<telemetry::TelemetryFrame>& points) {
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& g = points[i].gaze;
        lines.push_back(fmt::format("{} t={}ms {}", i, g.timestamp_ms,
                                    g.fixating && g.target_name ? "fixating " + *g.target_name : std::string("no fixation")));
    }
    return text::join(lines, "\n");
}

std::string hand_points_text(const std::vector<telemetry::TelemetryFrame>& points, const Vec3& origin) {
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        auto q = [](const Quat& r) { return f3(r.x()) + " " + f3(r.y()) + " " + f3(r.z()) + " " + f3(r.w()); };
        lines.push_back(fmt::format("{} head {} | left {} rot {} | right {} rot {}", i,
                                    vec_text(p.head_position - origin), vec_text(p.left.pose.palm_position - origin),
                                    q(p.left.pose.palm_rotation), vec_text(p.right.pose.palm_position - origin),
                                    q(p.right.pose.palm_rotation)));
    }
    return text::join(lines, "\n");
}

std::string finger_points_text(const std::vector<telemetry::TelemetryFrame>& points) {
    std::vector<std::string> lines;
    auto vals = [](const std::array<double, 5>& a) {
        std::vector<std::string> s;
        for (double v : a) s.push_back(fmt::format("{:.2f}", v));
        return text::join(s, " ");
    };
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        lines.push_back(fmt::format("{} left flex {} curl {} | right flex {} curl {}", i, vals(p.left.fingers.flexion),
                                    vals(p.left.fingers.curl), vals(p.right.fingers.flexion), vals(p.right.fingers.curl)));
    }
    return text::join(lines, "\n");
}

std::string describe_gaze(const GazeFeature& f) {
    auto t = f.targets();
    switch (f.pattern) {
        case GazePattern::ContinuousOnA: return "The user continuously gazes at " + t[0] + ".";
        case GazePattern::ShiftAtoB:
            return "The user first gazes at " + t[0] + " and then shifts their gaze to " + t[1] + ".";
        case GazePattern::ShiftAtoNone: return "The user gazes at " + t[0] + " and then looks away from all objects.";
        case GazePattern::NoFixation: return "The user does not fixate on any object.";
        case GazePattern::Other: break;
    }
    if (t.size() == 1) return "The user glances at " + t[0] + " intermittently.";
    return "The user's gaze moves from " + text::join(t, " to ") + ".";
}

std::string describe_hands(const HandMotionFeature& f) {
    std::vector<std::string> parts;
    bool left_active = f.left.moved() || f.left.rotation_significant;
    bool right_active = f.right.moved() || f.right.rotation_significant;
    if (!left_active && !right_active) {
        parts.emplace_back("Both hands remain still relative to the body.");
    } else {
        for (const auto* m : {&f.left, &f.right}) {
            if (m->moved() || m->rotation_significant)
                parts.push_back(sentence_for(*m));
            else
                parts.push_back("The " + hand_name(m->hand) + " hand stays still.");
        }
    }
    if (f.inter_hand == Trend::Closer) parts.emplace_back("The hands move closer to each other.");
    if (f.inter_hand == Trend::Farther) parts.emplace_back("The hands move apart.");
    for (auto [h, t] : {std::pair{Hand::Left, f.left_to_head}, std::pair{Hand::Right, f.right_to_head}}) {
        if (t == Trend::Closer) parts.push_back("The " + hand_name(h) + " hand comes toward the head.");
        if (t == Trend::Farther) parts.push_back("The " + hand_name(h) + " hand moves away from the head.");
    }
    return text::join(parts, " ");
}

std::string describe_fingers(const FingerFeature& f) {
    if (f.left.transitions.size() == 1 && f.right.transitions.size() == 1 && f.left.initial == f.right.initial)
        return "Both hands stay " + held_phrase(f.left.initial) + " throughout.";
    return fingers_sentence(Hand::Left, f.left) + " " + fingers_sentence(Hand::Right, f.right);
}

std::string gaze_slot(const GazeFeature& f) {
    return "pattern: " + std::string(to_string(f.pattern)) + "; targets: " +
           (f.targets().empty() ? std::string("none") : text::join(f.targets(), ", "));
}

std::string hand_slot(const HandMotionFeature& f) {
    return "left hand: " + motion_compact(f.left) + "; right hand: " + motion_compact(f.right) +
           "; distance between hands: " + std::string(to_string(f.inter_hand)) +
           "; left hand to head: " + std::string(to_string(f.left_to_head)) +
           "; right hand to head: " + std::string(to_string(f.right_to_head));
}

std::string finger_slot(const FingerFeature& f) {
    return "left hand: " + states_compact(f.left) + "; right hand: " + states_compact(f.right);
}

Translator::Translator(TranslatorConfig cfg, DescriptionMode mode, std::shared_ptr<llm::Backend> backend,
                       HandStateRules rules)
    : cfg_(cfg), mode_(mode), backend_(std::move(backend)), rules_(std::move(rules)) {
    if (mode_ == DescriptionMode::Llm && !backend_) throw ConfigError("LLM description mode needs a backend");
}

Translation Translator::translate(const telemetry::DemonstrationWindow& window) const {
    auto points = telemetry::downsample(window, cfg_.stride);
    Translation t;
    t.gaze = extract_gaze(points, cfg_);
    t.hands = extract_hand_motion(points, window.origin_head_position(), cfg_);
    t.fingers = extract_finger_states(points, rules_, cfg_);

    auto templated = [&] {
        t.bundle = {describe_gaze(t.gaze), describe_hands(t.hands), describe_fingers(t.fingers),
                    DescriptionMode::Templated};
    };
    if (mode_ == DescriptionMode::Templated) {
        templated();
        return t;
    }

    const auto& origin = window.origin_head_position();
    auto ask = [&](llm::Stage stage, const char* prompt_name, llm::SlotMap slots) {
        auto prompt = llm::load_prompt(prompt_name);
        auto c = backend_->complete({stage, prompt.render(slots), std::move(slots)});
        t.latency_ms += c.record.latency_ms;
        t.calls.push_back(c.record);
        return std::string(text::trim(c.text));
    };
    try {
        t.bundle.gaze = ask(llm::Stage::GazeDesc, "gaze_description",
                            {{"gaze_features", gaze_slot(t.gaze)}, {"gaze_points", gaze_points_text(points)}});
        t.bundle.hand = ask(llm::Stage::HandDesc, "hand_description",
                            {{"hand_features", hand_slot(t.hands)}, {"hand_points", hand_points_text(points, origin)}});
        t.bundle.finger = ask(llm::Stage::FingerDesc, "finger_description",
                              {{"finger_features", finger_slot(t.fingers)}, {"finger_points", finger_points_text(points)}});
        t.bundle.source = DescriptionMode::Llm;
    } catch (const Error& e) {
        if (!fallback_ || (e.kind() != ErrorKind::BackendError && e.kind() != ErrorKind::BackendTimeout)) throw;
        templated();
    }
    if (t.bundle.gaze.empty() || t.bundle.hand.empty() || t.bundle.finger.empty()) templated();
    return t;
}

}  // namespace siagent::translator
