#include "siagent/harness/batch.hpp"

#include <atomic>
#include <map>
#include <thread>

#include <fmt/format.h>

#include "siagent/core/error.hpp"
#include "siagent/core/paths.hpp"
#include "siagent/core/text.hpp"
#include "siagent/executor/agent.hpp"
#include "siagent/telemetry/synthesize.hpp"

namespace siagent::harness {

std::uint64_t trial_seed(std::uint64_t batch_seed, std::size_t index) {
    // splitmix64 over (seed, index)
    std::uint64_t z = batch_seed * 0x9E3779B97F4A7C15ULL + index + 1;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

bool plan_fits(const executor::ExecutionPlan& plan, TaskCategory c) {
    bool move = false, trig = false;
    for (const auto& s : plan.steps) {
        move |= s.kind == executor::StepKind::Movement;
        trig |= s.kind == executor::StepKind::Trigger;
    }
    return c == TaskCategory::Movement ? move : (trig && !move);
}

translator::Translation translate_task(const TaskSpec& task, const scene::SceneSnapshot& scene, std::uint64_t seed,
                                       translator::DescriptionMode mode, llm::Backend* backend) {
    auto tmpl = telemetry::resolve_template(task.template_id, scene);
    auto window = telemetry::synthesize_demo(tmpl, scene, seed);
    std::shared_ptr<llm::Backend> shared;
    if (mode == translator::DescriptionMode::Llm) shared = std::shared_ptr<llm::Backend>(backend, [](llm::Backend*) {});
    translator::Translator tr({}, mode, shared);
    return tr.translate(window);
}

}  // namespace

TrialResult run_trial(const TaskSpec& task, std::size_t index, const HarnessConfig& cfg, llm::Backend& backend) {
    TrialResult r;
    r.task_id = task.id;
    r.execution_status = "NotRun";
    try {
        auto scene = task_scene(task);
        auto tmpl = telemetry::resolve_template(task.template_id, scene);
        auto window = telemetry::synthesize_demo(tmpl, scene, trial_seed(cfg.seed, index));
        r.u_ms = static_cast<double>(window.duration_ms());

        std::shared_ptr<llm::Backend> shared(&backend, [](llm::Backend*) {});
        translator::Translator tr({}, cfg.descriptions, cfg.descriptions == translator::DescriptionMode::Llm ? shared : nullptr);
        auto translation = tr.translate(window);
        r.l_ms += translation.latency_ms;

        auto query = intent::make_query(translation, scene, cfg.channels);
        auto rec = intent::recognize(query, backend);
        r.l_ms += rec.latency_ms;

        const intent::IntentCandidate* chosen = nullptr;
        for (const auto& c : rec.candidates)
            if (intent_matches(c, task, scene)) {
                chosen = &c;
                break;
            }
        if (!chosen) {
            r.i_ms = cfg.confirm_ms + cfg.expand_ms;
            r.error = "ground truth not among the candidates";
            return r;
        }
        r.gt_rank = chosen->rank;
        r.intent_correct = true;
        r.chosen_intent = chosen->text;
        r.i_ms = cfg.confirm_ms + (chosen->rank > intent::kPresentedInitially ? cfg.expand_ms : 0.0);

        auto planned = executor::generate_plan(*chosen, scene, cfg.llm_planner ? &backend : nullptr);
        r.l_ms += planned.latency_ms;

        scene::SceneOwner owner(scene);
        SimulatedClock clock;
        auto run = executor::execute(planned.plan, owner, clock, cfg.execution);
        r.a_ms = run.elapsed_ms;
        r.execution_status = std::string(executor::to_string(run.status));
        r.execution_success = run.status == executor::RunStatus::Succeeded && plan_fits(planned.plan, task.category);
        if (run.status != executor::RunStatus::Succeeded) r.error = run.message;
        else if (!r.execution_success) r.error = "plan does not carry out the task";
    } catch (const Error& e) {
        if (r.intent_correct) r.execution_status = "Failed";
        r.error = e.what();
    }
    r.success = r.intent_correct && r.execution_success;
    if (r.success && r.agt() > cfg.pipeline_timeout_ms) {
        r.success = false;
        r.error = fmt::format("attempt took {:.0f} ms, over the {:.0f} ms budget", r.agt(), cfg.pipeline_timeout_ms);
    }
    return r;
}

std::vector<TrialResult> run_batch(const std::vector<TaskSpec>& tasks, const HarnessConfig& cfg, llm::Backend& backend) {
    std::vector<TrialResult> results(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) results[i] = run_trial(tasks[i], i, cfg, backend);
    };
    std::size_t width = std::max<std::size_t>(1, std::min(cfg.parallelism, tasks.size()));
    if (width == 1) {
        worker();
        return results;
    }
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < width; ++k) pool.emplace_back(worker);
    pool.clear();
    return results;
}

namespace {

struct Member {
    const TaskSpec* task;
    std::vector<std::string> targets;
};

struct Group {
    llm::SlotMap slots;
    std::vector<std::string> valid;
    std::string scene_id;
    std::vector<Member> members;
};

std::string plain_name(std::string_view name) { return text::to_lower(text::join(text::name_tokens(name), " ")); }

struct Line {
    std::string text;
    std::vector<std::string> targets;
};

std::string intent_response(const Group& g, const Catalog& catalog, const scene::SceneSnapshot& scene,
                            std::vector<Line>& lines) {
    auto used = [&](const std::string& t) {
        return std::any_of(lines.begin(), lines.end(), [&](const Line& l) { return text::iequals(l.text, t); });
    };
    for (const auto& m : g.members)
        if (!used(m.task->intent)) lines.push_back({m.task->intent, m.targets});
    const std::size_t own = lines.size();

    auto inside_gaze = [&](const std::vector<std::string>& ts) {
        return !ts.empty() && std::all_of(ts.begin(), ts.end(), [&](const std::string& t) {
            return std::find(g.valid.begin(), g.valid.end(), t) != g.valid.end();
        });
    };
    auto clashes = [&](const std::string& text, const std::vector<std::string>& targets) {
        intent::IntentCandidate c;
        c.text = text;
        c.targets = targets;
        return std::any_of(g.members.begin(), g.members.end(),
                           [&](const Member& m) { return intent_matches(c, *m.task, scene); });
    };
    for (const auto& t : catalog.tasks) {
        if (lines.size() >= intent::kMaxCandidates) break;
        if (t.scene_id != g.scene_id || used(t.intent)) continue;
        auto ts = task_targets(t, scene);
        if (inside_gaze(ts) && !clashes(t.intent, ts)) lines.push_back({t.intent, ts});
    }
    static const char* kFillers[] = {"Point at the {}", "Look closely at the {}", "Describe the {}",
                                     "Highlight the {}", "Ask about the {}", "Walk over to the {}"};
    for (const char* f : kFillers)
        for (const auto& v : g.valid) {
            if (lines.size() >= intent::kMaxCandidates) break;
            auto text = fmt::format(fmt::runtime(f), plain_name(v));
            if (!used(text)) lines.push_back({text, {v}});
        }

    std::vector<int> scores;
    if (own == 1) scores = {92, 41, 27, 15, 8, 3};
    else {
        for (std::size_t i = 0; i < own; ++i) scores.push_back(62 - 2 * static_cast<int>(i));
        for (int s : {40, 26, 14, 7, 3}) scores.push_back(std::min(s, scores.back()));
    }
    std::string out;
    for (std::size_t i = 0; i < lines.size() && i < intent::kMaxCandidates; ++i)
        out += fmt::format("{}. {} | targets: {} | score: {}\n", i + 1, lines[i].text, text::join(lines[i].targets, ", "),
                           scores[i]);
    return out;
}

}  // namespace

std::vector<llm::ScriptEntry> synthesize_mock_script(const Catalog& catalog, const SynthOptions& opts) {
    std::vector<llm::ScriptEntry> out;
    std::set<std::string> seen;
    auto add = [&](llm::ScriptEntry e, const std::string& key) {
        if (seen.insert(key).second) out.push_back(std::move(e));
    };

    std::map<std::string, scene::SceneSnapshot> scenes;
    std::vector<translator::Translation> translations;
    std::vector<std::pair<Line, std::string>> offered;  // with the task id of its scene
    for (std::size_t i = 0; i < catalog.tasks.size(); ++i) {
        const auto& t = catalog.tasks[i];
        auto s = task_scene(t);
        scenes.emplace(t.id, s);
        auto tr = translate_task(t, s, trial_seed(opts.seed, i), translator::DescriptionMode::Templated, nullptr);
        auto desc = [&](llm::Stage st, const char* slot, const std::string& features, const std::string& text) {
            add({st, "", {{slot, "=" + features}}, text, 900.0, t.id},
                std::string(llm::to_string(st)) + "|" + features);
        };
        desc(llm::Stage::GazeDesc, "gaze_features", translator::gaze_slot(tr.gaze), tr.bundle.gaze);
        desc(llm::Stage::HandDesc, "hand_features", translator::hand_slot(tr.hands), tr.bundle.hand);
        desc(llm::Stage::FingerDesc, "finger_features", translator::finger_slot(tr.fingers), tr.bundle.finger);
        translations.push_back(std::move(tr));
    }

    for (const auto& channels : {intent::kAllChannels, std::set<intent::Channel>{intent::Channel::Gaze}}) {
        std::vector<Group> groups;
        std::map<std::string, std::size_t> by_fp;
        for (std::size_t i = 0; i < catalog.tasks.size(); ++i) {
            const auto& t = catalog.tasks[i];
            const auto& s = scenes.at(t.id);
            auto q = intent::make_query(translations[i], s, channels);
            auto slots = intent::intent_slots(q);
            auto fp = llm::fingerprint(llm::Stage::Intent, slots);
            auto [it, fresh] = by_fp.emplace(fp, groups.size());
            if (fresh) {
                Group g{slots, {}, t.scene_id, {}};
                for (const auto& [name, _] : q.object_states) g.valid.push_back(name);
                groups.push_back(std::move(g));
            }
            groups[it->second].members.push_back({&t, task_targets(t, s)});
        }
        for (const auto& g : groups) {
            const auto& s = scenes.at(g.members.front().task->id);
            std::vector<std::string> ids;
            for (const auto& m : g.members) ids.push_back(m.task->id);
            auto fp = llm::fingerprint(llm::Stage::Intent, g.slots);
            std::vector<Line> lines;
            add({llm::Stage::Intent, fp, {}, intent_response(g, catalog, s, lines), opts.intent_latency_ms,
                 text::join(ids, " ")},
                fp);
            for (auto& l : lines) offered.emplace_back(std::move(l), g.members.front().task->id);
        }
    }

    auto plan_entry = [&](const std::string& text, std::vector<std::string> targets, const std::string& task_id) {
        const auto& s = scenes.at(task_id);
        intent::IntentCandidate c;
        c.text = text;
        c.targets = std::move(targets);
        try {
            auto plan = executor::deterministic_plan(c, s);
            auto fp = llm::fingerprint(llm::Stage::Execution, executor::execution_slots(c, s));
            add({llm::Stage::Execution, fp, {}, executor::format_plan(plan.steps), opts.plan_latency_ms, task_id}, fp);
        } catch (const PlanRejected&) {
            // left unscripted; the trial records the failure
        }
    };
    for (const auto& t : catalog.tasks) plan_entry(t.intent, task_targets(t, scenes.at(t.id)), t.id);
    // Non-ground-truth candidates, so any pick in a live session has a plan.
    for (const auto& [line, task_id] : offered) plan_entry(line.text, line.targets, task_id);
    return out;
}

std::filesystem::path default_mock_script(std::string_view catalog_name) {
    if (catalog_name == kSessionCatalogs) return data_dir() / "mock" / "sessions.jsonl";
    return data_dir() / "mock" / (std::string(catalog_name) + ".jsonl");
}

}  // namespace siagent::harness
