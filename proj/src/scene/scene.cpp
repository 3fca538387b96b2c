#include "siagent/scene/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "siagent/core/error.hpp"
#include "siagent/core/paths.hpp"
#include "siagent/core/text.hpp"

namespace siagent::scene {

std::vector<std::string> SceneObject::declared_states() const {
    std::vector<std::string> out;
    auto add = [&](const std::string& s) {
        if (s != kNoSpecialState && std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    };
    add(state);
    for (const auto& e : effects) {
        if (e.resulting_state) add(*e.resulting_state);
    }
    return out;
}

bool SceneObject::accepts_state(std::string_view s) const {
    if (s == kNoSpecialState) return true;
    const auto states = declared_states();
    return std::find(states.begin(), states.end(), s) != states.end();
}

const EffectSpec* SceneObject::find_effect(std::string_view effect_id) const {
    for (const auto& e : effects) {
        if (e.effect_id == effect_id) return &e;
    }
    return nullptr;
}

SceneSnapshot::SceneSnapshot(std::string id, std::vector<SceneObject> objects, std::uint64_t version)
    : id_(std::move(id)), version_(version), objects_(std::move(objects)) {
    std::set<std::string> names;
    for (const auto& o : objects_) {
        if (o.name.empty()) throw StateError("object with empty name");
        if (!names.insert(o.name).second) throw StateError("duplicate object name '" + o.name + "'");
        if (!(o.bounding_radius > 0.0)) throw StateError("object '" + o.name + "' has non-positive radius");
        std::set<std::string> effect_ids;
        for (const auto& e : o.effects) {
            if (!effect_ids.insert(e.effect_id).second) {
                throw StateError("object '" + o.name + "' declares effect '" + e.effect_id + "' twice");
            }
        }
    }
}

const SceneObject* SceneSnapshot::find(std::string_view name) const {
    for (const auto& o : objects_) {
        if (o.name == name) return &o;
    }
    return nullptr;
}

const SceneObject* SceneSnapshot::find_ci(std::string_view name) const {
    for (const auto& o : objects_) {
        if (text::iequals(o.name, name)) return &o;
    }
    return nullptr;
}

const SceneObject& SceneSnapshot::at(std::string_view name) const {
    if (const auto* o = find(name)) return *o;
    throw UnknownTarget(fmt::format("no object named '{}' in scene '{}'", name, id_));
}

Bounds SceneSnapshot::bounds(double margin) const {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
    for (const auto& o : objects_) {
        const Vec3 r = Vec3::Constant(o.bounding_radius);
        lo = lo.cwiseMin(o.pose.position - r);
        hi = hi.cwiseMax(o.pose.position + r);
    }
    return {lo - Vec3::Constant(margin), hi + Vec3::Constant(margin)};
}

SceneSnapshot SceneSnapshot::with_object(SceneObject replacement) const {
    auto objects = objects_;
    auto it = std::find_if(objects.begin(), objects.end(),
                           [&](const SceneObject& o) { return o.name == replacement.name; });
    if (it == objects.end()) throw StateError("unknown object '" + replacement.name + "'");
    if (*it == replacement) return *this;
    *it = std::move(replacement);
    return SceneSnapshot(id_, std::move(objects), version_ + 1);
}

SceneSnapshot SceneSnapshot::scaled(double k) const {
    auto objects = objects_;
    for (auto& o : objects) {
        o.pose.position *= k;
        o.bounding_radius *= k;
    }
    return SceneSnapshot(id_, std::move(objects), version_);
}

std::optional<std::string> resolve_gaze_target(const Vec3& head_position, const Vec3& gaze_direction,
                                               const SceneSnapshot& scene, double angular_tolerance_deg) {
    if (!gaze_direction.allFinite() || std::abs(gaze_direction.norm() - 1.0) > 1e-6) {
        throw InvalidDirection("gaze direction must be a unit vector");
    }
    const double cos_tol = std::cos(deg_to_rad(angular_tolerance_deg));

    const SceneObject* best = nullptr;
    double best_distance = std::numeric_limits<double>::infinity();
    for (const auto& o : scene.objects()) {
        const Vec3 to_center = o.pose.position - head_position;
        const double center_dist = to_center.norm();
        const double along = to_center.dot(gaze_direction);
        const double r = o.bounding_radius;

        double distance;
        if (center_dist <= r) {
            distance = 0.0;  // head inside the sphere
        } else if (along <= 0.0) {
            continue;  // behind the viewer
        } else {
            const double off_axis_sq = std::max(0.0, center_dist * center_dist - along * along);
            if (off_axis_sq <= r * r) {
                distance = along - std::sqrt(r * r - off_axis_sq);
            } else if (along / center_dist >= cos_tol) {
                distance = along - r;
            } else {
                continue;
            }
        }
        if (distance < best_distance) {
            best_distance = distance;
            best = &o;
        }
    }
    if (!best) return std::nullopt;
    return best->name;
}

SceneSnapshot apply_state_change(const SceneSnapshot& scene, std::string_view object, std::string_view new_state) {
    const auto* o = scene.find(object);
    if (!o) throw StateError(fmt::format("unknown object '{}'", object));
    if (!o->accepts_state(new_state)) {
        throw StateError(fmt::format("state '{}' is not declared for '{}'", new_state, object));
    }
    SceneObject updated = *o;
    updated.state = std::string(new_state);
    return scene.with_object(std::move(updated));
}

SceneSnapshot apply_pose_change(const SceneSnapshot& scene, std::string_view object, const Pose& pose) {
    const auto* o = scene.find(object);
    if (!o) throw StateError(fmt::format("unknown object '{}'", object));
    SceneObject updated = *o;
    updated.pose = pose;
    return scene.with_object(std::move(updated));
}

namespace {

constexpr std::string_view kHeader = "SIAGENT-SCENE";

/// Whitespace tokenizer that keeps "quoted labels" together (without quotes).
std::vector<std::string> tokenize(std::string_view line, std::size_t lineno) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        if (std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
            continue;
        }
        if (line[i] == '"') {
            const auto close = line.find('"', i + 1);
            if (close == std::string_view::npos) throw ParseError(lineno, "unterminated quoted label");
            out.emplace_back(line.substr(i + 1, close - i - 1));
            i = close + 1;
            continue;
        }
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        out.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

double parse_number(const std::string& token, std::size_t lineno, const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size() || !std::isfinite(v)) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception&) {
        throw ParseError(lineno, fmt::format("expected number for {}, got '{}'", what, token));
    }
}

SceneObject parse_object_line(const std::vector<std::string>& tok, std::size_t lineno) {
    // O name x y z qx qy qz qw radius mobile state [effect id "label" [-> state]]...
    if (tok.size() < 12) throw ParseError(lineno, "object line needs at least 12 fields");
    SceneObject o;
    o.name = tok[1];
    o.pose.position = Vec3(parse_number(tok[2], lineno, "x"), parse_number(tok[3], lineno, "y"),
                           parse_number(tok[4], lineno, "z"));
    o.pose.rotation = Quat(parse_number(tok[8], lineno, "qw"), parse_number(tok[5], lineno, "qx"),
                           parse_number(tok[6], lineno, "qy"), parse_number(tok[7], lineno, "qz"));
    if (!is_unit(o.pose.rotation, 1e-4)) throw ParseError(lineno, "rotation is not a unit quaternion");
    o.bounding_radius = parse_number(tok[9], lineno, "radius");
    if (!(o.bounding_radius > 0)) throw ParseError(lineno, "radius must be positive");
    if (tok[10] != "0" && tok[10] != "1") throw ParseError(lineno, "mobile flag must be 0 or 1");
    o.mobile = tok[10] == "1";
    o.state = tok[11] == "-" ? std::string(kNoSpecialState) : tok[11];

    std::size_t i = 12;
    while (i < tok.size()) {
        if (tok[i] != "effect" || i + 2 >= tok.size()) {
            throw ParseError(lineno, fmt::format("expected 'effect <id> \"<label>\"' at field {}", i + 1));
        }
        EffectSpec e{tok[i + 1], tok[i + 2], std::nullopt};
        i += 3;
        if (i < tok.size() && tok[i] == "->") {
            if (i + 1 >= tok.size()) throw ParseError(lineno, "missing state after '->'");
            e.resulting_state = tok[i + 1];
            i += 2;
        }
        if (o.find_effect(e.effect_id)) {
            throw ParseError(lineno, fmt::format("duplicate effect '{}' on '{}'", e.effect_id, o.name));
        }
        o.effects.push_back(std::move(e));
    }
    if (!o.accepts_state(o.state)) throw ParseError(lineno, "state not in declared set");
    return o;
}

struct ParsedScene {
    std::string id;
    std::vector<std::pair<std::size_t, SceneObject>> objects;
};

template <typename OnIssue>
ParsedScene parse_lines(std::string_view text, OnIssue&& on_issue) {
    ParsedScene result;
    bool have_header = false;
    std::size_t lineno = 0;
    for (const auto& raw : text::split(text, '\n')) {
        ++lineno;
        const auto line = text::trim(raw);
        if (!have_header) {
            const auto tok = text::split_ws(line);
            if (tok.size() != 3 || tok[0] != kHeader || tok[1] != "v1") {
                on_issue(ParseError(lineno, "missing 'SIAGENT-SCENE v1 <id>' header"));
                return result;
            }
            result.id = tok[2];
            have_header = true;
            continue;
        }
        if (line.empty() || line.front() == '#') continue;
        try {
            const auto tok = tokenize(line, lineno);
            if (tok.front() != "O") throw ParseError(lineno, "unknown record '" + tok.front() + "'");
            result.objects.emplace_back(lineno, parse_object_line(tok, lineno));
        } catch (const ParseError& e) {
            on_issue(e);
        }
    }
    if (!have_header) on_issue(ParseError(1, "missing 'SIAGENT-SCENE v1 <id>' header"));
    return result;
}

}  // namespace

SceneSnapshot parse_scene(std::string_view text) {
    auto parsed = parse_lines(text, [](const ParseError& e) { throw e; });
    std::vector<SceneObject> objects;
    std::set<std::string> names;
    for (auto& [lineno, o] : parsed.objects) {
        if (!names.insert(o.name).second) throw ParseError(lineno, "duplicate object name '" + o.name + "'");
        objects.push_back(std::move(o));
    }
    return SceneSnapshot(parsed.id, std::move(objects));
}

std::vector<ValidationIssue> validate_scene_text(std::string_view text) {
    std::vector<ValidationIssue> issues;
    auto parsed = parse_lines(text, [&](const ParseError& e) { issues.push_back({e.line(), e.what()}); });
    std::vector<std::pair<std::string, std::size_t>> seen;
    for (const auto& [lineno, o] : parsed.objects) {
        auto it = std::find_if(seen.begin(), seen.end(), [&](const auto& s) { return s.first == o.name; });
        if (it != seen.end()) {
            issues.push_back({lineno, fmt::format("line {}: duplicate object name '{}' (first declared on line {})",
                                                  lineno, o.name, it->second)});
        } else {
            seen.emplace_back(o.name, lineno);
        }
    }
    std::sort(issues.begin(), issues.end(), [](const auto& a, const auto& b) { return a.line < b.line; });
    return issues;
}

std::string format_scene(const SceneSnapshot& scene) {
    std::string out = fmt::format("{} v1 {}\n", kHeader, scene.id());
    for (const auto& o : scene.objects()) {
        const auto& p = o.pose.position;
        const auto& q = o.pose.rotation;
        out += fmt::format("O {} {} {} {} {} {} {} {} {} {} {}", o.name, text::fixed6(p.x()), text::fixed6(p.y()),
                           text::fixed6(p.z()), text::fixed6(q.x()), text::fixed6(q.y()), text::fixed6(q.z()),
                           text::fixed6(q.w()), text::fixed6(o.bounding_radius), o.mobile ? 1 : 0,
                           o.state == kNoSpecialState ? std::string("-") : o.state);
        for (const auto& e : o.effects) {
            out += fmt::format(" effect {} \"{}\"", e.effect_id, e.description);
            if (e.resulting_state) out += " -> " + *e.resulting_state;
        }
        out += '\n';
    }
    return out;
}

SceneSnapshot load_scene(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open scene file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scene(ss.str());
}

void save_scene(const SceneSnapshot& scene, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write scene file " + path.string());
    out << format_scene(scene);
    if (!out) throw IoError("write failed for " + path.string());
}

SceneSnapshot load_fixture_scene(std::string_view id) {
    return load_scene(data_dir() / "scenes" / (std::string(id) + ".scene"));
}

SceneOwner::SceneOwner(SceneSnapshot initial) : current_(std::move(initial)) {}

SceneSnapshot SceneOwner::snapshot() const {
    std::lock_guard lock(mutex_);
    return current_;
}

SceneSnapshot SceneOwner::apply_state(std::string_view object, std::string_view state) {
    std::lock_guard lock(mutex_);
    current_ = apply_state_change(current_, object, state);
    return current_;
}

SceneSnapshot SceneOwner::apply_pose(std::string_view object, const Pose& pose) {
    std::lock_guard lock(mutex_);
    current_ = apply_pose_change(current_, object, pose);
    return current_;
}

void SceneOwner::reset(SceneSnapshot s) {
    std::lock_guard lock(mutex_);
    current_ = std::move(s);
}

bool SceneOwner::available() const {
    std::lock_guard lock(mutex_);
    return available_;
}

void SceneOwner::set_available(bool available) {
    std::lock_guard lock(mutex_);
    available_ = available;
}

}  // namespace siagent::scene
