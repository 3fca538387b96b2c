#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "siagent/executor/plan.hpp"
#include "siagent/scene/scene.hpp"

namespace siagent::harness {

enum class TaskCategory { Movement, Trigger };

std::string_view to_string(TaskCategory c);

struct TaskSpec {
    std::string id;
    std::string scene_id;
    std::string intent;
    TaskCategory category = TaskCategory::Trigger;
    bool ambiguous = false;
    std::string template_id;
    /// Initial object states applied on top of the fixture scene.
    std::vector<std::pair<std::string, std::string>> setup;

    bool operator==(const TaskSpec&) const = default;
};

struct Catalog {
    std::string name;
    std::vector<TaskSpec> tasks;
};

// One task per line:
//   T <id> <scene> <Movement|Trigger> <0|1> <template> "<intent>" [Object=state ...]
Catalog parse_catalog(std::string_view text, std::string name = {});
std::string format_catalog(const Catalog& c);
Catalog load_catalog(const std::filesystem::path& path);
/// A bare name resolves to data/catalogs/<name>.cat; "a+b" concatenates.
Catalog load_named_catalog(std::string_view name_or_path);

/// Catalogs whose scripted answers back the default mock of live sessions
/// and replays (data/mock/sessions.jsonl).
inline constexpr std::string_view kSessionCatalogs = "tasks60+ambiguous21";

/// Fixture scene for the task with its setup states applied.
scene::SceneSnapshot task_scene(const TaskSpec& t);

/// Ground-truth target objects, read from the intent text.
std::vector<std::string> task_targets(const TaskSpec& t, const scene::SceneSnapshot& scene);

struct CatalogIssue {
    std::string task_id;
    std::string message;
};

/// Targets resolve, the template resolves, setup states are declared and the
/// rule planner yields a plan of the declared category.
std::vector<CatalogIssue> validate_catalog(const Catalog& c);

/// Normalized intent matching: same canonical verb and the same target set.
bool intent_matches(const intent::IntentCandidate& candidate, const TaskSpec& task,
                    const scene::SceneSnapshot& scene);

}  // namespace siagent::harness
