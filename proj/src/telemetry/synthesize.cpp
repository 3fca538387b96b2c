#include "siagent/telemetry/synthesize.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "siagent/core/error.hpp"
#include "siagent/core/text.hpp"

namespace siagent::telemetry {

std::string_view to_string(HandState s) {
    switch (s) {
        case HandState::Open: return "Open";
        case HandState::HalfGrip: return "HalfGrip";
        case HandState::TightGrip: return "TightGrip";
        case HandState::TipPinch: return "TipPinch";
        case HandState::IndexTap: return "IndexTap";
        case HandState::Unknown: return "Unknown";
    }
    return "Unknown";
}

std::string_view describe(HandState s) {
    switch (s) {
        case HandState::Open: return "open";
        case HandState::HalfGrip: return "half-grip";
        case HandState::TightGrip: return "tight-grip";
        case HandState::TipPinch: return "tip pinch";
        case HandState::IndexTap: return "index tap";
        case HandState::Unknown: return "unrecognized shape";
    }
    return "unrecognized shape";
}

std::optional<HandState> hand_state_from_string(std::string_view s) {
    for (auto st : {HandState::Open, HandState::HalfGrip, HandState::TightGrip, HandState::TipPinch,
                    HandState::IndexTap, HandState::Unknown}) {
        if (text::iequals(to_string(st), s)) return st;
    }
    return std::nullopt;
}

namespace {

// Dead zone used when declaring expected direction labels. Matches the
// extractor default; templates keep displacements well clear of it.
constexpr double kDeclaredDeadZone = 0.05;
constexpr double kDeclaredRotationThreshold = 45.0;

// Bent pattern (thumb..pinky) per canonical shape.
struct ShapePattern {
    std::array<bool, 5> flex;
    std::array<bool, 5> curl;
};

ShapePattern canonical_pattern(HandState s) {
    switch (s) {
        case HandState::Open: return {{0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}};
        case HandState::HalfGrip: return {{1, 1, 1, 1, 1}, {0, 0, 0, 0, 0}};
        case HandState::TightGrip: return {{1, 1, 1, 1, 1}, {1, 1, 1, 1, 1}};
        case HandState::TipPinch: return {{1, 1, 0, 0, 0}, {1, 1, 0, 0, 0}};
        case HandState::IndexTap: return {{1, 0, 1, 1, 1}, {1, 0, 1, 1, 1}};
        case HandState::Unknown: return {{0, 1, 0, 1, 0}, {1, 0, 1, 0, 1}};
    }
    return {};
}

/// Portable uniform draws on top of the standard engine.
class Jitter {
public:
    explicit Jitter(std::uint64_t seed) : engine_(seed) {}
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double symmetric(double half_width) { return (2.0 * unit() - 1.0) * half_width; }
    Vec3 vec(double half_width) { return {symmetric(half_width), symmetric(half_width), symmetric(half_width)}; }

private:
    std::mt19937_64 engine_;
};

double q6(double v) {
    const double r = std::round(v * 1e6) / 1e6;
    return r == 0.0 ? 0.0 : r;
}

Vec3 q6(const Vec3& v) { return {q6(v.x()), q6(v.y()), q6(v.z())}; }

Quat q6(const Quat& q) {
    Quat n = q.normalized();
    if (n.w() < 0) n.coeffs() *= -1.0;
    return Quat(q6(n.w()), q6(n.x()), q6(n.y()), q6(n.z()));
}

HandState shape_at(const HandMotionSpec& spec, std::size_t frame) {
    HandState s = HandState::Open;
    for (const auto& [from, shape] : spec.shapes) {
        if (frame >= from) s = shape;
    }
    return s;
}

HandSample synth_hand(const HandMotionSpec& spec, Hand hand, const Vec3& origin, std::size_t i, std::size_t n,
                      Jitter& jitter) {
    const double u = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    const double ease = u * u * (3.0 - 2.0 * u);
    const double t_s = static_cast<double>(i) / kFrameRateHz;

    HandSample s;
    s.pose.hand = hand;
    s.fingers.hand = hand;
    Vec3 wobble = spec.wobble * std::sin(2.0 * std::numbers::pi * spec.wobble_hz * t_s);
    s.pose.palm_position = q6(origin + spec.start_offset + spec.displacement * ease + wobble + jitter.vec(0.004));

    const double angle = spec.rotation_deg * ease +
                         spec.oscillation_deg * std::sin(2.0 * std::numbers::pi * spec.oscillation_hz * t_s);
    const Quat base(Eigen::AngleAxisd(deg_to_rad(angle), spec.rotation_axis.normalized()));
    const Vec3 noise_axis = jitter.vec(1.0);
    const double noise_angle = deg_to_rad(jitter.symmetric(0.3));
    Quat noise = Quat::Identity();
    if (noise_axis.norm() > 1e-9) noise = Quat(Eigen::AngleAxisd(noise_angle, noise_axis.normalized()));
    s.pose.palm_rotation = q6(noise * base);

    const auto pattern = canonical_pattern(shape_at(spec, i));
    for (std::size_t f = 0; f < 5; ++f) {
        s.fingers.flexion[f] = q6(pattern.flex[f] ? 0.70 + 0.25 * jitter.unit() : 0.05 + 0.25 * jitter.unit());
        s.fingers.curl[f] = q6(pattern.curl[f] ? 0.70 + 0.25 * jitter.unit() : 0.05 + 0.25 * jitter.unit());
    }
    return s;
}

/// Unit vector within `max_deg` of `dir`.
Vec3 perturb_direction(const Vec3& dir, double max_deg, Jitter& jitter) {
    Vec3 axis = dir.unitOrthogonal();
    const double spin = jitter.unit() * 2.0 * std::numbers::pi;
    axis = Eigen::AngleAxisd(spin, dir) * axis;
    const double tilt = deg_to_rad(jitter.unit() * max_deg);
    return (Eigen::AngleAxisd(tilt, axis) * dir).normalized();
}

std::array<int, 3> declared_direction(const Vec3& d) {
    std::array<int, 3> out{};
    for (int a = 0; a < 3; ++a) {
        out[a] = d[a] > kDeclaredDeadZone ? 1 : (d[a] < -kDeclaredDeadZone ? -1 : 0);
    }
    return out;
}

bool declared_rotation(const HandMotionSpec& s) {
    return std::abs(s.rotation_deg) >= kDeclaredRotationThreshold || s.oscillation_deg >= 10.0;
}

// Rest poses relative to the head.
const Vec3 kRightRest{0.25, -0.45, -0.35};
const Vec3 kLeftRest{-0.25, -0.45, -0.35};

Vec3 horizontal_toward(const scene::SceneObject& from, const scene::SceneObject& to) {
    Vec3 d = to.pose.position - from.pose.position;
    d.y() = 0.0;
    if (d.norm() < 0.05) return Vec3(0, 0, -1);
    return d.normalized();
}

HandMotionSpec rest(const Vec3& offset) {
    HandMotionSpec s;
    s.start_offset = offset;
    return s;
}

HandMotionSpec right_rest() { return rest(kRightRest); }
HandMotionSpec left_rest() { return rest(kLeftRest); }

void finish_expected(MotionTemplate& t) {
    t.expected.gaze_targets.clear();
    for (const auto& g : t.gaze) {
        if (g.target && (t.expected.gaze_targets.empty() || t.expected.gaze_targets.back() != *g.target)) {
            t.expected.gaze_targets.push_back(*g.target);
        }
    }
    t.expected.left_direction = declared_direction(t.left.displacement);
    t.expected.right_direction = declared_direction(t.right.displacement);
    t.expected.left_rotation_significant = declared_rotation(t.left);
    t.expected.right_rotation_significant = declared_rotation(t.right);
    t.expected.left_final = t.left.shapes.back().second;
    t.expected.right_final = t.right.shapes.back().second;
}

struct TemplateArgs {
    const scene::SceneObject* a = nullptr;
    const scene::SceneObject* b = nullptr;
};

using Builder = void (*)(MotionTemplate&, const TemplateArgs&);

void single_gaze(MotionTemplate& t, const TemplateArgs& x) { t.gaze = {{x.a->name, t.frames}}; }

void shift_gaze(MotionTemplate& t, const TemplateArgs& x, std::size_t first) {
    t.gaze = {{x.a->name, first}, {x.b->name, t.frames - first}};
}

struct Archetype {
    std::string_view name;
    int objects;  // 1 or 2
    Builder build;
};

const Archetype kArchetypes[] = {
    {"static", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.right = right_rest();
     }},
    {"tap", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.right = right_rest();
         t.right.displacement = Vec3(0.0, 0.03, -0.15);
         t.right.shapes = {{0, HandState::Open}, {40, HandState::IndexTap}};
     }},
    {"press", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.right = right_rest();
         t.right.displacement = Vec3(0.0, -0.10, 0.0);
         t.right.shapes = {{0, HandState::Open}, {30, HandState::IndexTap}};
     }},
    {"knob", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.right = right_rest();
         t.right.rotation_axis = Vec3::UnitZ();
         t.right.rotation_deg = 90.0;
         t.right.shapes = {{0, HandState::Open}, {20, HandState::TipPinch}};
     }},
    {"lift", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.right = right_rest();
         t.right.displacement = Vec3(0.0, 0.20, 0.0);
         t.right.shapes = {{0, HandState::Open}, {15, HandState::HalfGrip}};
     }},
    {"push-down", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.right = right_rest();
         t.right.start_offset += Vec3(0.0, 0.10, 0.0);
         t.right.displacement = Vec3(0.0, -0.20, 0.0);
     }},
    {"pull", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.right = right_rest();
         t.right.start_offset += Vec3(0.0, 0.0, -0.15);
         t.right.displacement = Vec3(0.0, 0.0, 0.25);
         t.right.shapes = {{0, HandState::Open}, {15, HandState::HalfGrip}};
     }},
    {"push", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.right = right_rest();
         t.right.displacement = Vec3(0.0, 0.0, -0.25);
     }},
    {"twist-open", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.left.shapes = {{0, HandState::TightGrip}};
         t.right = right_rest();
         t.right.start_offset = kLeftRest + Vec3(0.05, 0.12, 0.0);
         t.right.displacement = Vec3(0.0, 0.08, 0.0);
         t.right.rotation_axis = Vec3::UnitY();
         t.right.rotation_deg = 120.0;
         t.right.shapes = {{0, HandState::Open}, {10, HandState::TipPinch}};
     }},
    {"twist-close", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.left.shapes = {{0, HandState::TightGrip}};
         t.right = right_rest();
         t.right.start_offset = kLeftRest + Vec3(0.05, 0.20, 0.0);
         t.right.displacement = Vec3(0.0, -0.08, 0.0);
         t.right.rotation_axis = Vec3::UnitY();
         t.right.rotation_deg = -120.0;
         t.right.shapes = {{0, HandState::Open}, {10, HandState::TipPinch}};
     }},
    {"shake", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.right = right_rest();
         t.right.wobble = Vec3(0.0, 0.06, 0.0);
         t.right.wobble_hz = 3.0;
         t.right.rotation_axis = Vec3::UnitX();
         t.right.oscillation_deg = 35.0;
         t.right.oscillation_hz = 1.5;
         t.right.shapes = {{0, HandState::Open}, {10, HandState::TightGrip}};
     }},
    {"wipe", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.right = right_rest();
         t.right.start_offset += Vec3(-0.15, 0.15, -0.10);
         t.right.displacement = Vec3(0.30, 0.0, 0.0);
     }},
    {"spin", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.right = right_rest();
         t.right.start_offset += Vec3(0.10, 0.05, -0.10);
         t.right.displacement = Vec3(-0.25, 0.0, 0.0);
         t.right.shapes = {{0, HandState::Open}, {30, HandState::IndexTap}};
     }},
    {"fetch", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.right = right_rest();
         for (auto* h : {&t.left, &t.right}) {
             h->start_offset += Vec3(0.0, 0.05, -0.20);
             h->displacement = Vec3(0.0, 0.0, 0.30);
             h->shapes = {{0, HandState::Open}, {20, HandState::HalfGrip}};
         }
     }},
    {"strum", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.left.start_offset += Vec3(-0.15, 0.15, 0.0);
         t.left.shapes = {{0, HandState::HalfGrip}};
         t.right = right_rest();
         t.right.start_offset += Vec3(0.0, 0.08, 0.0);
         t.right.displacement = Vec3(0.0, -0.15, 0.0);
         t.right.wobble = Vec3(0.0, 0.05, 0.0);
         t.right.wobble_hz = 2.0;
         t.right.shapes = {{0, HandState::Open}, {5, HandState::TipPinch}};
     }},
    {"drink", 1, [](MotionTemplate& t, const TemplateArgs& x) {
         single_gaze(t, x);
         t.left = left_rest();
         t.right = right_rest();
         t.right.displacement = Vec3(-0.20, 0.30, 0.20);
         t.right.rotation_axis = Vec3::UnitZ();
         t.right.rotation_deg = 60.0;
         t.right.shapes = {{0, HandState::Open}, {10, HandState::HalfGrip}};
     }},
    {"grab-move", 2, [](MotionTemplate& t, const TemplateArgs& x) {
         shift_gaze(t, x, 45);
         t.left = left_rest();
         t.right = right_rest();
         t.right.displacement = 0.30 * horizontal_toward(*x.a, *x.b);
         t.right.shapes = {{0, HandState::Open}, {10, HandState::HalfGrip}, {20, HandState::TightGrip}};
     }},
    {"carry", 2, [](MotionTemplate& t, const TemplateArgs& x) {
         shift_gaze(t, x, 45);
         t.left = left_rest();
         t.right = right_rest();
         const Vec3 d = 0.30 * horizontal_toward(*x.a, *x.b);
         for (auto* h : {&t.left, &t.right}) {
             h->displacement = d;
             h->shapes = {{0, HandState::Open}, {15, HandState::HalfGrip}};
         }
     }},
    {"pinch-place", 2, [](MotionTemplate& t, const TemplateArgs& x) {
         shift_gaze(t, x, 45);
         t.left = left_rest();
         t.right = right_rest();
         t.right.displacement = 0.25 * horizontal_toward(*x.a, *x.b) + Vec3(0.0, -0.10, 0.0);
         t.right.shapes = {{0, HandState::Open}, {15, HandState::TipPinch}};
     }},
    {"write", 2, [](MotionTemplate& t, const TemplateArgs& x) {
         shift_gaze(t, x, 30);
         t.left = left_rest();
         t.right = right_rest();
         t.right.wobble = Vec3(0.02, 0.0, 0.01);
         t.right.wobble_hz = 2.5;
         t.right.shapes = {{0, HandState::Open}, {10, HandState::TipPinch}};
     }},
    {"pour", 2, [](MotionTemplate& t, const TemplateArgs& x) {
         shift_gaze(t, x, 40);
         t.left = left_rest();
         t.right = right_rest();
         t.right.displacement = Vec3(-0.30, 0.0, 0.0);
         t.right.rotation_axis = Vec3::UnitZ();
         t.right.rotation_deg = 70.0;
         t.right.shapes = {{0, HandState::Open}, {10, HandState::HalfGrip}};
     }},
    {"cut", 2, [](MotionTemplate& t, const TemplateArgs& x) {
         shift_gaze(t, x, 30);
         t.left = left_rest();
         t.right = right_rest();
         t.right.displacement = 0.20 * horizontal_toward(*x.a, *x.b) + Vec3(0.0, -0.10, 0.0);
         t.right.wobble = Vec3(0.0, 0.0, 0.04);
         t.right.wobble_hz = 2.0;
         t.right.shapes = {{0, HandState::Open}, {10, HandState::TightGrip}};
     }},
    {"season", 2, [](MotionTemplate& t, const TemplateArgs& x) {
         shift_gaze(t, x, 30);
         t.left = left_rest();
         t.right = right_rest();
         t.right.displacement = 0.20 * horizontal_toward(*x.a, *x.b);
         t.right.rotation_axis = Vec3::UnitZ();
         t.right.oscillation_deg = 30.0;
         t.right.oscillation_hz = 1.5;
         t.right.shapes = {{0, HandState::Open}, {10, HandState::TipPinch}};
     }},
    {"throw", 2, [](MotionTemplate& t, const TemplateArgs& x) {
         shift_gaze(t, x, 30);
         t.left = left_rest();
         t.right = right_rest();
         t.right.displacement = 0.30 * horizontal_toward(*x.a, *x.b) + Vec3(0.0, 0.10, 0.0);
         t.right.shapes = {{0, HandState::Open}, {5, HandState::TightGrip}, {65, HandState::Open}};
     }},
};

struct Alias {
    std::string_view name;
    std::string_view expansion;
};

const Alias kAliases[] = {
    {"pour-right-to-left", "pour@Bottle+Cup"},
    {"static-gaze-lamp", "static@DeskLamp"},
    {"index-tap-lamp", "tap@DeskLamp"},
};

}  // namespace

std::vector<std::string> template_archetypes() {
    std::vector<std::string> out;
    for (const auto& a : kArchetypes) out.emplace_back(a.name);
    return out;
}

MotionTemplate resolve_template(std::string_view id, const scene::SceneSnapshot& scene) {
    std::string_view spec = id;
    for (const auto& a : kAliases) {
        if (a.name == id) spec = a.expansion;
    }
    const auto at = spec.find('@');
    if (at == std::string_view::npos) throw ConfigError(fmt::format("malformed template id '{}'", id));
    const auto archetype_name = spec.substr(0, at);
    const auto objects = text::split(spec.substr(at + 1), '+');

    const Archetype* archetype = nullptr;
    for (const auto& a : kArchetypes) {
        if (a.name == archetype_name) archetype = &a;
    }
    if (!archetype) throw ConfigError(fmt::format("unknown motion archetype '{}'", archetype_name));
    if (static_cast<int>(objects.size()) != archetype->objects) {
        throw ConfigError(fmt::format("archetype '{}' takes {} object(s)", archetype_name, archetype->objects));
    }

    TemplateArgs args;
    args.a = &scene.at(objects[0]);
    if (objects.size() > 1) args.b = &scene.at(objects[1]);

    MotionTemplate t;
    t.id = std::string(id);
    archetype->build(t, args);
    finish_expected(t);
    return t;
}

DemonstrationWindow synthesize_demo(const MotionTemplate& tmpl, const scene::SceneSnapshot& scene,
                                    std::uint64_t jitter_seed, std::uint64_t first_seq) {
    for (const auto& g : tmpl.gaze) {
        if (g.target && !scene.find(*g.target)) {
            throw UnknownTarget(fmt::format("template '{}' gazes at '{}', which is not in scene '{}'", tmpl.id,
                                            *g.target, scene.id()));
        }
    }
    Jitter jitter(text::fnv1a64(tmpl.id, jitter_seed * 0x9E3779B97F4A7C15ull + 1));

    std::vector<std::optional<std::string>> schedule;
    for (const auto& g : tmpl.gaze) {
        for (std::size_t k = 0; k < g.frames; ++k) schedule.push_back(g.target);
    }
    schedule.resize(tmpl.frames, schedule.empty() ? std::nullopt : schedule.back());

    const Vec3 origin = q6(tmpl.head_position);
    std::vector<TelemetryFrame> frames;
    frames.reserve(tmpl.frames);
    for (std::size_t i = 0; i < tmpl.frames; ++i) {
        TelemetryFrame f;
        f.seq = first_seq + i;
        f.gaze.timestamp_ms = static_cast<std::int64_t>(std::llround(static_cast<double>(i) * kFramePeriodMs));
        f.head_position = i == 0 ? origin : q6(origin + jitter.vec(0.002));
        if (const auto& target = schedule[i]) {
            const Vec3 to_target = (scene.at(*target).pose.position - f.head_position).normalized();
            const Vec3 dir = perturb_direction(to_target, 0.5, jitter);
            f.gaze.target_name = scene::resolve_gaze_target(f.head_position, dir, scene);
            f.gaze.fixating = f.gaze.target_name.has_value();
        }
        f.left = synth_hand(tmpl.left, Hand::Left, origin, i, tmpl.frames, jitter);
        f.right = synth_hand(tmpl.right, Hand::Right, origin, i, tmpl.frames, jitter);
        frames.push_back(std::move(f));
    }
    return DemonstrationWindow(std::move(frames), origin);
}

}  // namespace siagent::telemetry
