#include "siagent/executor/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "siagent/core/error.hpp"

namespace siagent::executor {

using scene::SceneObject;
using scene::SceneSnapshot;

std::string_view to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Succeeded: return "Succeeded";
        case RunStatus::TimedOut: return "TimedOut";
        case RunStatus::Aborted: return "Aborted";
        case RunStatus::Failed: return "Failed";
    }
    return "Failed";
}

std::vector<Vec3> micro_motion(std::string_view pattern, const std::vector<Vec3>& base, double amplitude,
                               double frequency_hz, double dt_ms) {
    if (std::find(kMicroPatterns.begin(), kMicroPatterns.end(), pattern) == kMicroPatterns.end())
        throw PatternError("unknown micro-motion pattern '" + std::string(pattern) + "'");
    if (base.size() < 2 || amplitude <= 0.0) return base;

    Vec3 dir = Vec3::UnitY();
    if (pattern == "write_scribble") {
        Vec3 along = base.back() - base.front();
        Vec3 perp = along.cross(Vec3::UnitY());
        dir = perp.norm() > 1e-9 ? perp.normalized() : Vec3::UnitX();
    }
    const double pi = std::numbers::pi;
    std::vector<Vec3> out(base.size());
    const auto last = static_cast<double>(base.size() - 1);
    for (std::size_t i = 0; i < base.size(); ++i) {
        double s = static_cast<double>(i) / last;
        double t = static_cast<double>(i) * dt_ms / 1000.0;
        double wave = std::sin(2.0 * pi * frequency_hz * t);
        if (pattern == "tap_burst") wave = std::abs(wave);
        if (pattern == "pour_tilt_hold") wave *= 0.5;
        out[i] = base[i] + dir * (amplitude * std::sin(pi * s) * wave);
    }
    out.front() = base.front();
    out.back() = base.back();
    return out;
}

namespace {

constexpr double kMicroHoldMs = 1000.0;

struct Interrupted {
    RunStatus status;
    std::string message;
};

class Runner {
public:
    Runner(const ExecutionPlan& plan, scene::SceneOwner& owner, Clock& clock, const ExecutionConfig& cfg,
           const ProgressSink& sink, const std::atomic<bool>* cancel)
        : plan_(plan), owner_(owner), clock_(clock), cfg_(cfg), sink_(sink), cancel_(cancel),
          dt_(1000.0 / cfg.tick_hz), start_(clock.now_ms()), hand_(cfg.hand_home) {}

    AgentRun run() {
        AgentRun r;
        for (const auto& s : plan_.steps) r.steps.push_back({s, 0.0, false});
        trajectory_.push_back({0.0, hand_, std::nullopt});
        try {
            for (index_ = 0; index_ < plan_.steps.size(); ++index_) {
                guard();
                double step_start = elapsed();
                run_step(plan_.steps[index_]);
                r.steps[index_].elapsed_ms = elapsed() - step_start;
                r.steps[index_].completed = true;
                emit("step_done", std::string(to_string(plan_.steps[index_].kind)) + " " + plan_.steps[index_].target);
            }
            r.status = RunStatus::Succeeded;
            r.message = plan_.steps.empty() ? "nothing to do" : "all steps completed";
        } catch (const Interrupted& e) {
            r.status = e.status;
            r.message = e.message;
        }
        emit("finished", std::string(to_string(r.status)));
        r.elapsed_ms = elapsed();
        r.trajectory = std::move(trajectory_);
        r.final_scene = owner_.snapshot();
        return r;
    }

private:
    double elapsed() const { return clock_.now_ms() - start_; }

    void emit(std::string phase, std::string detail) {
        if (sink_) sink_({index_, plan_.steps.size(), std::move(phase), elapsed(), hand_, std::move(detail)});
    }

    void guard() {
        if (cancel_ && cancel_->load()) throw Interrupted{RunStatus::Aborted, "cancelled"};
        if (!owner_.available()) throw Interrupted{RunStatus::Aborted, "scene owner unavailable"};
    }

    void tick(const Vec3& hand) {
        clock_.sleep_ms(dt_);
        hand_ = hand;
        trajectory_.push_back({elapsed(), hand_, holding_});
        if (elapsed() >= cfg_.timeout_ms)
            throw Interrupted{RunStatus::TimedOut, fmt::format("execution exceeded {} ms", cfg_.timeout_ms)};
        guard();
    }

    std::vector<Vec3> segment(const Vec3& from, const Vec3& to) const {
        double per_tick = cfg_.speed_mps * dt_ / 1000.0;
        auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((to - from).norm() / per_tick)));
        std::vector<Vec3> pts;
        for (std::size_t k = 0; k <= n; ++k) pts.push_back(from + (to - from) * (static_cast<double>(k) / n));
        return pts;
    }

    void follow(const std::vector<Vec3>& pts) {
        for (std::size_t k = 1; k < pts.size(); ++k) tick(pts[k]);
    }

    void run_step(const ExecutionStep& s) {
        if (s.kind == StepKind::NoOp) return;
        auto snap = owner_.snapshot();
        const SceneObject* o = snap.find(s.target);
        if (!o) throw Interrupted{RunStatus::Failed, "object '" + s.target + "' is not in the scene"};

        if (s.kind == StepKind::Trigger) {
            const auto* e = o->find_effect(s.trigger->effect_id);
            if (!e) throw Interrupted{RunStatus::Failed, "'" + s.target + "' has no effect " + s.trigger->effect_id};
            Vec3 dir = hand_ - o->pose.position;
            Vec3 contact = dir.norm() > 1e-9 ? Vec3(o->pose.position + dir.normalized() * o->bounding_radius)
                                             : o->pose.position;
            emit("approach", s.target);
            follow(segment(hand_, contact));
            emit("tap", e->effect_id);
            for (double t = 0.0; t < cfg_.tap_ms; t += dt_) tick(contact);
            if (e->resulting_state) owner_.apply_state(s.target, *e->resulting_state);
            emit("effect", e->effect_id);
            return;
        }

        if (!o->mobile) throw Interrupted{RunStatus::Failed, "'" + s.target + "' is not mobile"};
        emit("approach", s.target);
        follow(segment(hand_, o->pose.position));
        holding_ = s.target;
        emit("carry", s.target);
        const auto& goal = s.movement->goal;
        auto path = segment(hand_, goal.position);
        const auto& micro = s.movement->micro;
        if (micro) {
            std::vector<Vec3> hold(static_cast<std::size_t>(std::ceil(kMicroHoldMs / dt_)) + 1, goal.position);
            path.insert(path.end(), hold.begin() + 1, hold.end());
            path = micro_motion(micro->pattern, path, micro->amplitude, micro->frequency_hz, dt_);
        }
        follow(path);
        owner_.apply_pose(s.target, goal);
        holding_.reset();
    }

    const ExecutionPlan& plan_;
    scene::SceneOwner& owner_;
    Clock& clock_;
    const ExecutionConfig& cfg_;
    const ProgressSink& sink_;
    const std::atomic<bool>* cancel_;
    double dt_;
    double start_;
    Vec3 hand_;
    std::optional<std::string> holding_;
    std::vector<TrajectorySample> trajectory_;
    std::size_t index_ = 0;
};

}  // namespace

AgentRun execute(const ExecutionPlan& plan, scene::SceneOwner& owner, Clock& clock, const ExecutionConfig& cfg,
                 const ProgressSink& on_progress, const std::atomic<bool>* cancel) {
    return Runner(plan, owner, clock, cfg, on_progress, cancel).run();
}

SceneSnapshot replay_steps(const SceneSnapshot& initial, const std::vector<ExecutionStep>& steps) {
    auto s = initial;
    for (const auto& step : steps) {
        if (step.kind == StepKind::Movement) {
            s = scene::apply_pose_change(s, step.target, step.movement->goal);
        } else if (step.kind == StepKind::Trigger) {
            const auto* e = s.at(step.target).find_effect(step.trigger->effect_id);
            if (e && e->resulting_state) s = scene::apply_state_change(s, step.target, *e->resulting_state);
        }
    }
    return s;
}

}  // namespace siagent::executor
