#include "siagent/executor/plan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "siagent/core/error.hpp"
#include "siagent/core/text.hpp"
#include "siagent/intent/lexicon.hpp"
#include "siagent/llm/prompt.hpp"

namespace siagent::executor {

using scene::SceneObject;
using scene::SceneSnapshot;

std::string_view to_string(StepKind k) {
    switch (k) {
        case StepKind::Movement: return "Movement";
        case StepKind::Trigger: return "Trigger";
        case StepKind::NoOp: return "NoOp";
    }
    return "NoOp";
}

ExecutionStep ExecutionStep::move(std::string target, Pose goal, std::optional<MicroMotion> micro) {
    ExecutionStep s;
    s.kind = StepKind::Movement;
    s.target = std::move(target);
    s.movement = MovementOp{std::move(goal), std::move(micro)};
    return s;
}

ExecutionStep ExecutionStep::trig(std::string target, std::string effect_id) {
    ExecutionStep s;
    s.kind = StepKind::Trigger;
    s.target = std::move(target);
    s.trigger = TriggerOp{std::move(effect_id)};
    return s;
}

std::string format_step(const ExecutionStep& s) {
    using text::fixed6;
    switch (s.kind) {
        case StepKind::NoOp: return "NOOP";
        case StepKind::Trigger: return "TRIGGER " + s.target + " " + s.trigger->effect_id;
        case StepKind::Movement: {
            const auto& g = s.movement->goal;
            auto line = fmt::format("MOVE {} -> {} {} {} {} {} {} {}", s.target, fixed6(g.position.x()),
                                    fixed6(g.position.y()), fixed6(g.position.z()), fixed6(g.rotation.x()),
                                    fixed6(g.rotation.y()), fixed6(g.rotation.z()), fixed6(g.rotation.w()));
            if (const auto& m = s.movement->micro)
                line += fmt::format(" micro {} {} {}", m->pattern, fixed6(m->amplitude), fixed6(m->frequency_hz));
            return line;
        }
    }
    return "NOOP";
}

std::string format_plan(const std::vector<ExecutionStep>& steps) {
    if (steps.empty()) return "NOOP\n";
    std::string out;
    for (const auto& s : steps) out += format_step(s) + "\n";
    return out;
}

namespace {

double number(const std::string& tok, std::size_t line) {
    try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(line, "expected a number, got '" + tok + "'");
    }
}

// Drops list decorations like "1." or "-" in front of a step keyword.
std::vector<std::string> step_tokens(std::string_view line) {
    auto tok = text::split_ws(line);
    while (!tok.empty()) {
        const auto& t = tok.front();
        bool decoration = t == "-" || t == "*" ||
                          (t.size() >= 2 && (t.back() == '.' || t.back() == ')') &&
                           std::all_of(t.begin(), t.end() - 1, [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }));
        if (!decoration) break;
        tok.erase(tok.begin());
    }
    return tok;
}

}  // namespace

std::vector<ExecutionStep> parse_plan(std::string_view text) {
    std::vector<ExecutionStep> steps;
    bool saw_noop = false;
    std::size_t line_no = 0;
    for (const auto& raw : text::split(text, '\n')) {
        ++line_no;
        auto tok = step_tokens(text::trim(raw));
        if (tok.empty() || tok[0].starts_with('#')) continue;
        auto kw = text::to_lower(tok[0]);
        if (kw == "noop") {
            saw_noop = true;
            continue;
        }
        if (kw == "trigger") {
            if (tok.size() != 3) throw ParseError(line_no, "expected 'TRIGGER <object> <effect_id>'");
            steps.push_back(ExecutionStep::trig(tok[1], tok[2]));
            continue;
        }
        if (kw == "move") {
            if (tok.size() != 10 && tok.size() != 14)
                throw ParseError(line_no, "expected 'MOVE <object> -> x y z qx qy qz qw [micro <pattern> <amp> <freq>]'");
            if (tok[2] != "->") throw ParseError(line_no, "expected '->' after the object name");
            Pose goal;
            goal.position = Vec3(number(tok[3], line_no), number(tok[4], line_no), number(tok[5], line_no));
            goal.rotation = Quat(number(tok[9], line_no), number(tok[6], line_no), number(tok[7], line_no),
                                 number(tok[8], line_no));
            std::optional<MicroMotion> micro;
            if (tok.size() == 14) {
                if (text::to_lower(tok[10]) != "micro") throw ParseError(line_no, "expected 'micro'");
                micro = MicroMotion{tok[11], number(tok[12], line_no), number(tok[13], line_no)};
            }
            steps.push_back(ExecutionStep::move(tok[1], goal, micro));
            continue;
        }
        // anything else is commentary from the model
    }
    if (steps.empty() && !saw_noop) throw ParseError(1, "no MOVE, TRIGGER or NOOP line found");
    return steps;
}

void validate_step(const ExecutionStep& s, const SceneSnapshot& scene) {
    if (s.kind == StepKind::NoOp) return;
    const auto* o = scene.find(s.target);
    if (!o) throw PlanRejected("step references unknown object '" + s.target + "'");
    if (s.kind == StepKind::Trigger) {
        if (!s.trigger || s.movement) throw PlanRejected("trigger step must carry only an effect");
        if (!o->find_effect(s.trigger->effect_id))
            throw PlanRejected("object '" + s.target + "' has no effect '" + s.trigger->effect_id + "'");
        return;
    }
    if (!s.movement || s.trigger) throw PlanRejected("movement step must carry only a goal pose");
    if (!o->mobile) throw PlanRejected("object '" + s.target + "' is not mobile");
    const auto& g = s.movement->goal;
    if (!g.position.allFinite() || !g.rotation.coeffs().allFinite())
        throw PlanRejected("goal pose for '" + s.target + "' is not finite");
    if (!is_unit(g.rotation, 1e-5)) throw PlanRejected("goal rotation for '" + s.target + "' is not a unit quaternion");
    if (!scene.bounds().contains(g.position))
        throw PlanRejected("goal for '" + s.target + "' lies outside the scene bounds");
    if (const auto& m = s.movement->micro) {
        if (std::find(kMicroPatterns.begin(), kMicroPatterns.end(), m->pattern) == kMicroPatterns.end())
            throw PlanRejected("unknown micro-motion pattern '" + m->pattern + "'");
        if (!(m->amplitude >= 0.0 && m->amplitude <= 0.2) || !(m->frequency_hz >= 0.0 && m->frequency_hz <= 10.0))
            throw PlanRejected("micro-motion parameters out of range");
    }
}

void validate_plan(const ExecutionPlan& p, const SceneSnapshot& scene) {
    for (const auto& s : p.steps) validate_step(s, scene);
}

namespace {

const std::set<std::string> kTriggerVerbs{"turn_on", "turn_off", "adjust", "open", "close", "start",
                                          "clean", "play", "spin", "press", "brew"};

std::vector<std::string> normalized_name(std::string_view name) {
    return text::word_tokens(text::join(text::name_tokens(name), " "));
}

std::size_t first_mention(const std::vector<std::string>& toks, const SceneObject& o) {
    auto name = normalized_name(o.name);
    for (std::size_t i = 0; i + name.size() <= toks.size(); ++i)
        if (std::equal(name.begin(), name.end(), toks.begin() + static_cast<std::ptrdiff_t>(i))) return i;
    for (std::size_t i = 0; i < toks.size(); ++i)
        if (toks[i] == name.back()) return i;
    return std::numeric_limits<std::size_t>::max();
}

const scene::EffectSpec* effect_for(const SceneObject& o, std::string_view verb, const std::vector<std::string>& toks) {
    const auto& lex = intent::VerbLexicon::defaults();
    const scene::EffectSpec* best = nullptr;
    int best_overlap = -1;
    for (const auto& e : o.effects) {
        if (lex.canonical(e.description) != verb) continue;
        int overlap = 0;
        for (const auto& w : text::word_tokens(e.description))
            overlap += std::count(toks.begin(), toks.end(), w) > 0 ? 1 : 0;
        if (overlap > best_overlap) {
            best_overlap = overlap;
            best = &e;
        }
    }
    return best;
}

enum class Relation { Inside, On, Near };

Relation relation_before(const std::vector<std::string>& toks, std::size_t dest_pos) {
    // nearest relation word preceding the destination mention
    for (std::size_t i = std::min(dest_pos, toks.size()); i-- > 0;) {
        const auto& w = toks[i];
        if (w == "in" || w == "into" || w == "inside") return Relation::Inside;
        if (w == "on" || w == "onto" || w == "top") return Relation::On;
        if (w == "next" || w == "near" || w == "beside" || w == "by" || w == "to") return Relation::Near;
    }
    return Relation::Near;
}

Vec3 toward_user_contact(const SceneObject& dest, double extra) {
    Vec3 user(0.0, 1.6, 0.0);
    Vec3 dir = user - dest.pose.position;
    if (dir.norm() < 1e-9) dir = Vec3::UnitZ();
    return dest.pose.position + dir.normalized() * (dest.bounding_radius + extra);
}

Quat tilt(const Quat& base, const Vec3& axis, double deg) {
    return (Quat(Eigen::AngleAxisd(deg_to_rad(deg), axis)) * base).normalized();
}

}  // namespace

ExecutionPlan deterministic_plan(const intent::IntentCandidate& intent, const SceneSnapshot& scene) {
    ExecutionPlan plan;
    plan.source_intent = intent;
    auto toks = text::word_tokens(intent.text);

    std::vector<const SceneObject*> targets;
    auto names = intent.targets.empty() ? intent::match_object_names(intent.text, scene) : intent.targets;
    for (const auto& n : names) {
        const auto* o = scene.find_ci(n);
        if (!o) throw PlanRejected("intent names unknown object '" + n + "'");
        if (std::find(targets.begin(), targets.end(), o) == targets.end()) targets.push_back(o);
    }
    auto verb = intent::VerbLexicon::defaults().canonical(intent.text);
    if (!verb || targets.empty()) return plan;  // nothing actionable

    if (kTriggerVerbs.contains(*verb)) {
        for (const auto* o : targets) {
            if (const auto* e = effect_for(*o, *verb, toks)) {
                plan.steps.push_back(ExecutionStep::trig(o->name, e->effect_id));
                return plan;
            }
        }
        throw PlanRejected(fmt::format("no effect for '{}' on {}", *verb, targets.front()->name));
    }

    // movement: the object after "with" is the tool, otherwise the first mobile one moves
    const SceneObject* mover = nullptr;
    auto with = std::find(toks.begin(), toks.end(), "with");
    if (with != toks.end()) {
        auto with_pos = static_cast<std::size_t>(with - toks.begin());
        for (const auto* o : targets)
            if (first_mention(toks, *o) > with_pos && first_mention(toks, *o) != std::numeric_limits<std::size_t>::max()) {
                mover = o;
                break;
            }
    }
    if (!mover)
        for (const auto* o : targets)
            if (o->mobile) {
                mover = o;
                break;
            }
    if (!mover) throw PlanRejected("'" + targets.front()->name + "' is not mobile and cannot be moved");
    if (!mover->mobile) throw PlanRejected("'" + mover->name + "' is not mobile and cannot be moved");

    const SceneObject* dest = nullptr;
    for (const auto* o : targets)
        if (o != mover) {
            dest = o;
            break;
        }

    const double rm = mover->bounding_radius;
    Pose goal = mover->pose;
    std::optional<MicroMotion> micro;
    auto above = [&](double gap) -> Vec3 {
        return dest->pose.position + Vec3(0.0, dest->bounding_radius + rm + gap, 0.0);
    };

    const auto& v = *verb;
    if (v == "fetch" || (!dest && v == "place")) {
        goal.position = kReachPoint;
    } else if (v == "drink") {
        goal.position = Vec3(0.0, 1.5, -0.15);
        goal.rotation = tilt(mover->pose.rotation, Vec3::UnitX(), 30.0);
    } else if (v == "pour") {
        goal.position = dest ? above(0.05) : kReachPoint;
        goal.rotation = tilt(mover->pose.rotation, Vec3::UnitZ(), kPourTiltDeg);
        micro = MicroMotion{"pour_tilt_hold", 0.01, 0.5};
    } else if (v == "write" || v == "erase") {
        goal.position = dest ? toward_user_contact(*dest, rm) : kReachPoint;
        micro = v == "write" ? MicroMotion{"write_scribble", 0.03, 2.0} : MicroMotion{"write_scribble", 0.06, 1.5};
    } else if (v == "shake") {
        goal.position = dest ? above(0.10) : kReachPoint;
        micro = MicroMotion{"shake", 0.03, 4.0};
    } else if (v == "cut") {
        goal.position = dest ? above(0.0) : kReachPoint;
        micro = MicroMotion{"shake", 0.03, 2.0};
    } else if (v == "wash") {
        goal.position = dest ? dest->pose.position : kReachPoint;
        micro = MicroMotion{"shake", 0.03, 2.0};
    } else if (v == "place") {
        auto rel = relation_before(toks, first_mention(toks, *dest));
        if (rel == Relation::Inside) {
            const auto* open = effect_for(*dest, "open", toks);
            const auto* close = effect_for(*dest, "close", toks);
            bool closed = open && open->resulting_state && dest->state != *open->resulting_state;
            if (closed) plan.steps.push_back(ExecutionStep::trig(dest->name, open->effect_id));
            plan.steps.push_back(ExecutionStep::move(mover->name, Pose{dest->pose.position, mover->pose.rotation}));
            if (closed && close) plan.steps.push_back(ExecutionStep::trig(dest->name, close->effect_id));
            return plan;
        }
        if (rel == Relation::On)
            goal.position = above(0.0);
        else
            goal.position = dest->pose.position + Vec3(dest->bounding_radius + rm + 0.02, 0.0, 0.0);
    } else {
        return plan;  // verb without a rule: no operation
    }
    plan.steps.push_back(ExecutionStep::move(mover->name, goal, micro));
    return plan;
}

llm::SlotMap execution_slots(const intent::IntentCandidate& intent, const SceneSnapshot& scene) {
    std::vector<std::string> objects, effects;
    for (const auto& o : scene.objects()) {
        const auto& p = o.pose.position;
        const auto& q = o.pose.rotation;
        objects.push_back(fmt::format("- {} | {} | position {} {} {} | rotation {} {} {} {} | radius {} | state: {}",
                                      o.name, o.mobile ? "mobile" : "fixed", text::fixed6(p.x()), text::fixed6(p.y()),
                                      text::fixed6(p.z()), text::fixed6(q.x()), text::fixed6(q.y()), text::fixed6(q.z()),
                                      text::fixed6(q.w()), text::fixed6(o.bounding_radius), o.state));
        for (const auto& e : o.effects)
            effects.push_back(fmt::format("- {} {}: {}{}", o.name, e.effect_id, e.description,
                                          e.resulting_state ? " -> " + *e.resulting_state : std::string()));
    }
    return {{"intent", intent.text},
            {"targets", intent.targets.empty() ? std::string("none") : text::join(intent.targets, ", ")},
            {"objects", text::join(objects, "\n")},
            {"effects", effects.empty() ? std::string("- none") : text::join(effects, "\n")}};
}

PlanResult generate_plan(const intent::IntentCandidate& intent, const SceneSnapshot& scene, llm::Backend* backend) {
    PlanResult r;
    if (!backend) {
        r.plan = deterministic_plan(intent, scene);
        validate_plan(r.plan, scene);
        return r;
    }
    auto tmpl = llm::load_prompt("execution");
    auto slots = execution_slots(intent, scene);
    std::string reason;
    for (int attempt = 1; attempt <= 2; ++attempt) {
        auto prompt = tmpl.render(slots);
        if (attempt > 1) {
            slots["retry"] = reason;
            prompt += "\n\nYour previous plan was rejected: " + reason +
                      "\nReply again using only MOVE, TRIGGER or NOOP lines.\n";
        }
        auto c = backend->complete({llm::Stage::Execution, prompt, slots});
        r.calls.push_back(c.record);
        r.latency_ms += c.record.latency_ms;
        try {
            r.plan.steps = parse_plan(c.text);
            r.plan.source_intent = intent;
            validate_plan(r.plan, scene);
            return r;
        } catch (const ParseError& e) {
            reason = e.what();
        } catch (const PlanRejected& e) {
            reason = e.what();
        }
    }
    throw PlanFailure("plan rejected twice: " + reason);
}

}  // namespace siagent::executor
