#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "siagent/harness/catalog.hpp"
#include "siagent/harness/metrics.hpp"
#include "siagent/intent/intent.hpp"
#include "siagent/llm/backend.hpp"
#include "siagent/llm/mock.hpp"
#include "siagent/translator/translator.hpp"

namespace siagent::harness {

struct HarnessConfig {
    std::uint64_t seed = 1;
    std::set<intent::Channel> channels = intent::kAllChannels;
    translator::DescriptionMode descriptions = translator::DescriptionMode::Templated;
    /// Plan through the backend; otherwise the rule planner.
    bool llm_planner = true;
    /// Simulated confirmation time, plus an extra delay when the answer is
    /// only visible after expanding to six.
    double confirm_ms = 2500.0;
    double expand_ms = 1500.0;
    /// Budget for one whole attempt, U + L + I + A.
    double pipeline_timeout_ms = 30000.0;
    executor::ExecutionConfig execution;
    std::size_t parallelism = 1;
};

/// Jitter seed for the i-th task of a batch.
std::uint64_t trial_seed(std::uint64_t batch_seed, std::size_t index);

/// One task end to end. Per-trial failures land in the result.
TrialResult run_trial(const TaskSpec& task, std::size_t index, const HarnessConfig& cfg, llm::Backend& backend);

/// Results come back in catalog order whatever the parallelism.
std::vector<TrialResult> run_batch(const std::vector<TaskSpec>& tasks, const HarnessConfig& cfg,
                                   llm::Backend& backend);

struct SynthOptions {
    std::uint64_t seed = 1;
    double intent_latency_ms = 4600.0;
    double plan_latency_ms = 3400.0;
};

/// Scripted answers for every task of the catalog under both the full and
/// the gaze-only channel set. Tasks whose queries coincide share one
/// answer listing all of their intents, so the script can only be as
/// precise as the query it sees.
std::vector<llm::ScriptEntry> synthesize_mock_script(const Catalog& catalog, const SynthOptions& opts = {});

/// data/mock/<catalog name>.jsonl
std::filesystem::path default_mock_script(std::string_view catalog_name);

}  // namespace siagent::harness
