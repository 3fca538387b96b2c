#include "siagent/translator/features.hpp"

#include <cmath>

#include "siagent/core/error.hpp"

namespace siagent::translator {

using telemetry::TelemetryFrame;

std::string_view to_string(GazePattern p) {
    switch (p) {
        case GazePattern::ContinuousOnA: return "ContinuousOnA";
        case GazePattern::ShiftAtoB: return "ShiftAtoB";
        case GazePattern::ShiftAtoNone: return "ShiftAtoNone";
        case GazePattern::NoFixation: return "NoFixation";
        case GazePattern::Other: return "Other";
    }
    return "Other";
}

std::string_view to_string(Trend t) {
    switch (t) {
        case Trend::Closer: return "closer";
        case Trend::Farther: return "farther";
        case Trend::Steady: return "steady";
    }
    return "steady";
}

std::vector<std::string> GazeFeature::targets() const {
    std::vector<std::string> out;
    for (const auto& s : segments)
        if (s.target && (out.empty() || out.back() != *s.target)) out.push_back(*s.target);
    return out;
}

namespace {

std::optional<std::string> target_of(const TelemetryFrame& f) {
    return f.gaze.fixating ? f.gaze.target_name : std::nullopt;
}

void coalesce(std::vector<GazeSegment>& segs) {
    std::vector<GazeSegment> out;
    for (auto& s : segs) {
        if (!out.empty() && out.back().target == s.target)
            out.back().last = s.last;
        else
            out.push_back(std::move(s));
    }
    segs = std::move(out);
}

GazePattern classify(const std::vector<GazeSegment>& segs) {
    bool any = false;
    for (const auto& s : segs) any = any || s.target.has_value();
    if (!any) return GazePattern::NoFixation;
    if (segs.size() == 1) return GazePattern::ContinuousOnA;
    if (segs.size() == 2 && segs[0].target) return segs[1].target ? GazePattern::ShiftAtoB : GazePattern::ShiftAtoNone;
    return GazePattern::Other;
}

int axis_label(double d, double dead_zone) {
    if (d >= dead_zone) return 1;
    if (d <= -dead_zone) return -1;
    return 0;
}

Trend trend_of(double delta, double dead_zone) {
    if (delta <= -dead_zone) return Trend::Closer;
    if (delta >= dead_zone) return Trend::Farther;
    return Trend::Steady;
}

HandMotion motion_of(const std::vector<TelemetryFrame>& pts, telemetry::Hand h, const TranslatorConfig& cfg) {
    HandMotion m;
    m.hand = h;
    const auto& first = pts.front().hand(h).pose;
    const auto& last = pts.back().hand(h).pose;
    m.net_displacement = last.palm_position - first.palm_position;
    for (int a = 0; a < 3; ++a) m.direction[a] = axis_label(m.net_displacement[a], cfg.dead_zone_m);
    for (std::size_t i = 1; i < pts.size(); ++i)
        m.cumulative_rotation_deg +=
            angle_between_deg(pts[i - 1].hand(h).pose.palm_rotation, pts[i].hand(h).pose.palm_rotation);
    m.rotation_significant = m.cumulative_rotation_deg >= cfg.rotation_threshold_deg;
    return m;
}

}  // namespace

GazeFeature extract_gaze(const std::vector<TelemetryFrame>& points, const TranslatorConfig& cfg) {
    if (points.empty()) throw EmptyWindow("no points to extract gaze from");
    GazeFeature f;
    for (std::size_t i = 0; i < points.size(); ++i)
        f.segments.push_back({target_of(points[i]), i, i});
    coalesce(f.segments);

    // absorb short runs into the preceding segment (the following one for a
    // leading run) until every run is long enough or only one remains
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < f.segments.size() && f.segments.size() > 1; ++i) {
            if (f.segments[i].length() >= cfg.min_fixation_run) continue;
            if (i > 0)
                f.segments[i - 1].last = f.segments[i].last;
            else
                f.segments[1].first = f.segments[0].first;
            f.segments.erase(f.segments.begin() + static_cast<std::ptrdiff_t>(i));
            coalesce(f.segments);
            changed = true;
            break;
        }
    }
    f.pattern = classify(f.segments);
    return f;
}

HandMotionFeature extract_hand_motion(const std::vector<TelemetryFrame>& points, const Vec3& origin,
                                      const TranslatorConfig& cfg) {
    if (points.size() < 2) throw InsufficientData("hand motion needs at least two points");
    (void)origin;  // displacements and distances are origin-independent with world-aligned axes
    HandMotionFeature f;
    f.left = motion_of(points, telemetry::Hand::Left, cfg);
    f.right = motion_of(points, telemetry::Hand::Right, cfg);

    auto inter = [](const TelemetryFrame& fr) {
        return (fr.left.pose.palm_position - fr.right.pose.palm_position).norm();
    };
    auto to_head = [](const TelemetryFrame& fr, telemetry::Hand h) {
        return (fr.hand(h).pose.palm_position - fr.head_position).norm();
    };
    const auto& a = points.front();
    const auto& b = points.back();
    f.inter_hand_delta_m = inter(b) - inter(a);
    f.left_to_head_delta_m = to_head(b, telemetry::Hand::Left) - to_head(a, telemetry::Hand::Left);
    f.right_to_head_delta_m = to_head(b, telemetry::Hand::Right) - to_head(a, telemetry::Hand::Right);
    f.inter_hand = trend_of(f.inter_hand_delta_m, cfg.trend_dead_zone_m);
    f.left_to_head = trend_of(f.left_to_head_delta_m, cfg.trend_dead_zone_m);
    f.right_to_head = trend_of(f.right_to_head_delta_m, cfg.trend_dead_zone_m);
    return f;
}

std::vector<std::string> direction_labels(const std::array<int, 3>& d) {
    std::vector<std::string> out;
    if (d[0] > 0) out.emplace_back("left-to-right");
    if (d[0] < 0) out.emplace_back("right-to-left");
    if (d[1] > 0) out.emplace_back("upward");
    if (d[1] < 0) out.emplace_back("downward");
    if (d[2] < 0) out.emplace_back("forward");
    if (d[2] > 0) out.emplace_back("backward");
    return out;
}

}  // namespace siagent::translator
