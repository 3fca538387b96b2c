#pragma once

#include <optional>
#include <string>
#include <vector>

#include "siagent/executor/agent.hpp"

namespace siagent::harness {

struct TrialResult {
    std::string task_id;
    double u_ms = 0.0;
    double l_ms = 0.0;
    double i_ms = 0.0;
    double a_ms = 0.0;
    /// Rank of the first candidate matching the ground truth; nullopt on a miss.
    std::optional<int> gt_rank;
    bool intent_correct = false;
    bool execution_success = false;
    /// Intent correct, execution succeeded and the whole attempt stayed
    /// inside the time budget.
    bool success = false;
    std::string execution_status;
    std::string chosen_intent;
    std::string error;

    double agt() const { return u_ms + l_ms + i_ms + a_ms; }
    double agt_star() const { return u_ms + i_ms + a_ms; }
    double agt_star2() const { return u_ms + i_ms; }
};

struct MetricsReport {
    std::size_t trials = 0;
    double mean_agt_ms = 0.0;
    double mean_agt_star_ms = 0.0;
    double mean_agt_star2_ms = 0.0;
    double mean_u_ms = 0.0;
    double mean_l_ms = 0.0;
    double mean_i_ms = 0.0;
    double mean_a_ms = 0.0;
    double accuracy = 0.0;
    /// Fraction of trials whose ground truth was among the candidates.
    double agt1 = 0.0;
    /// Execution success among trials with a correct intent; nullopt if none.
    std::optional<double> agt2;
    double top1 = 0.0;
    double top3 = 0.0;
    double top6 = 0.0;
};

/// Throws EmptyBatch on no results.
MetricsReport compute_metrics(const std::vector<TrialResult>& results);

/// Human-readable table. Byte-identical for equal inputs.
std::string format_report(const MetricsReport& m, std::string_view title);
/// One JSON object per trial, then one for the summary.
std::string format_records(const std::vector<TrialResult>& results, const MetricsReport& m);

struct AblationReport {
    MetricsReport gaze_only;
    MetricsReport full;
    double delta_top1 = 0.0;
    double delta_top3 = 0.0;
    double delta_top6 = 0.0;
};

/// Throws std::invalid_argument unless both sets cover the same tasks.
AblationReport ablation_report(const std::vector<TrialResult>& full, const std::vector<TrialResult>& gaze_only);
std::string format_ablation(const AblationReport& a);

// Reference figures shown beside measured ones; never asserted.
struct ReferenceTopK {
    double top1, top3, top6;
};
inline constexpr ReferenceTopK kReferenceGazeOnly{30.2, 63.5, 81.0};
inline constexpr ReferenceTopK kReferenceFull{58.3, 75.0, 93.3};
inline constexpr ReferenceTopK kReferenceCloudTasks{83.3, 90.7, 96.3};
inline constexpr double kReferenceCloudLatencyS = 9.1;

}  // namespace siagent::harness
