#include "siagent/harness/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "siagent/core/error.hpp"
#include "siagent/core/paths.hpp"
#include "siagent/core/text.hpp"
#include "siagent/intent/lexicon.hpp"
#include "siagent/telemetry/synthesize.hpp"

namespace siagent::harness {

std::string_view to_string(TaskCategory c) { return c == TaskCategory::Movement ? "Movement" : "Trigger"; }

Catalog parse_catalog(std::string_view text, std::string name) {
    Catalog c{std::move(name), {}};
    std::set<std::string> ids;
    std::size_t line_no = 0;
    for (const auto& raw : text::split(text, '\n')) {
        ++line_no;
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto q1 = line.find('"');
        auto q2 = q1 == std::string_view::npos ? q1 : line.find('"', q1 + 1);
        if (q2 == std::string_view::npos) throw ParseError(line_no, "intent text must be in double quotes");
        auto head = text::split_ws(line.substr(0, q1));
        if (head.size() != 6 || head[0] != "T")
            throw ParseError(line_no, "expected 'T <id> <scene> <Movement|Trigger> <0|1> <template> \"<intent>\"'");
        TaskSpec t;
        t.id = head[1];
        t.scene_id = head[2];
        if (head[3] == "Movement")
            t.category = TaskCategory::Movement;
        else if (head[3] == "Trigger")
            t.category = TaskCategory::Trigger;
        else
            throw ParseError(line_no, "category must be Movement or Trigger, got '" + head[3] + "'");
        if (head[4] != "0" && head[4] != "1") throw ParseError(line_no, "ambiguous flag must be 0 or 1");
        t.ambiguous = head[4] == "1";
        t.template_id = head[5];
        t.intent = std::string(text::trim(line.substr(q1 + 1, q2 - q1 - 1)));
        if (t.intent.empty()) throw ParseError(line_no, "empty intent text");
        for (const auto& tok : text::split_ws(line.substr(q2 + 1))) {
            auto eq = tok.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size())
                throw ParseError(line_no, "setup entries look like Object=state, got '" + tok + "'");
            t.setup.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
        }
        if (!ids.insert(t.id).second) throw ParseError(line_no, "duplicate task id '" + t.id + "'");
        c.tasks.push_back(std::move(t));
    }
    return c;
}

std::string format_catalog(const Catalog& c) {
    std::ostringstream out;
    for (const auto& t : c.tasks) {
        out << "T " << t.id << ' ' << t.scene_id << ' ' << to_string(t.category) << ' ' << (t.ambiguous ? 1 : 0)
            << ' ' << t.template_id << " \"" << t.intent << '"';
        for (const auto& [o, s] : t.setup) out << ' ' << o << '=' << s;
        out << '\n';
    }
    return out.str();
}

Catalog load_catalog(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read catalog " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_catalog(ss.str(), path.stem().string());
}

Catalog load_named_catalog(std::string_view name_or_path) {
    if (name_or_path.find('+') != std::string_view::npos) {
        Catalog merged{std::string(name_or_path), {}};
        std::set<std::string> ids;
        for (const auto& part : text::split(name_or_path, '+')) {
            for (auto& t : load_named_catalog(part).tasks) {
                if (!ids.insert(t.id).second) throw ConfigError(fmt::format("task id {} appears twice in {}", t.id, name_or_path));
                merged.tasks.push_back(std::move(t));
            }
        }
        return merged;
    }
    std::filesystem::path p(name_or_path);
    if (p.has_extension() || p.has_parent_path()) return load_catalog(p);
    return load_catalog(data_dir() / "catalogs" / (std::string(name_or_path) + ".cat"));
}

scene::SceneSnapshot task_scene(const TaskSpec& t) {
    auto s = scene::load_fixture_scene(t.scene_id);
    for (const auto& [obj, state] : t.setup) s = scene::apply_state_change(s, obj, state);
    return s;
}

std::vector<std::string> task_targets(const TaskSpec& t, const scene::SceneSnapshot& scene) {
    return intent::match_object_names(t.intent, scene);
}

std::vector<CatalogIssue> validate_catalog(const Catalog& c) {
    std::vector<CatalogIssue> issues;
    for (const auto& t : c.tasks) {
        auto issue = [&](std::string m) { issues.push_back({t.id, std::move(m)}); };
        try {
            auto s = task_scene(t);
            auto targets = task_targets(t, s);
            if (targets.empty()) {
                issue("intent names no scene object");
                continue;
            }
            telemetry::resolve_template(t.template_id, s);
            intent::IntentCandidate gt;
            gt.text = t.intent;
            gt.targets = targets;
            auto plan = executor::deterministic_plan(gt, s);
            executor::validate_plan(plan, s);
            auto has = [&](executor::StepKind k) {
                return std::any_of(plan.steps.begin(), plan.steps.end(), [&](const auto& st) { return st.kind == k; });
            };
            if (plan.is_noop()) issue("rule planner finds no operation");
            else if (t.category == TaskCategory::Movement && !has(executor::StepKind::Movement))
                issue("movement task plans no movement");
            else if (t.category == TaskCategory::Trigger && has(executor::StepKind::Movement))
                issue("trigger task plans a movement");
        } catch (const Error& e) {
            issue(e.what());
        }
    }
    return issues;
}

bool intent_matches(const intent::IntentCandidate& candidate, const TaskSpec& task, const scene::SceneSnapshot& scene) {
    const auto& lex = intent::VerbLexicon::defaults();
    auto want_verb = lex.canonical(task.intent);
    auto got_verb = lex.canonical(candidate.text);
    if (want_verb != got_verb) return false;
    if (!want_verb && text::word_tokens(task.intent) != text::word_tokens(candidate.text)) return false;

    auto canonical_set = [&](const std::vector<std::string>& names) {
        std::set<std::string> out;
        for (const auto& n : names)
            if (const auto* o = scene.find_ci(n)) out.insert(o->name);
        return out;
    };
    auto got = candidate.targets.empty() ? intent::match_object_names(candidate.text, scene) : candidate.targets;
    return canonical_set(got) == canonical_set(task_targets(task, scene));
}

}  // namespace siagent::harness
