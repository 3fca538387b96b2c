#include "siagent/harness/metrics.hpp"

#include <set>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "siagent/core/error.hpp"

namespace siagent::harness {

MetricsReport compute_metrics(const std::vector<TrialResult>& results) {
    if (results.empty()) throw EmptyBatch("no trial results to summarize");
    MetricsReport m;
    m.trials = results.size();
    std::size_t correct = 0, executed = 0, success = 0, t1 = 0, t3 = 0, t6 = 0;
    for (const auto& r : results) {
        m.mean_agt_ms += r.agt();
        m.mean_agt_star_ms += r.agt_star();
        m.mean_agt_star2_ms += r.agt_star2();
        m.mean_u_ms += r.u_ms;
        m.mean_l_ms += r.l_ms;
        m.mean_i_ms += r.i_ms;
        m.mean_a_ms += r.a_ms;
        if (r.intent_correct) {
            ++correct;
            if (r.execution_success) ++executed;
        }
        if (r.success) ++success;
        if (r.gt_rank) {
            t1 += *r.gt_rank <= 1;
            t3 += *r.gt_rank <= 3;
            t6 += *r.gt_rank <= 6;
        }
    }
    const double n = static_cast<double>(results.size());
    for (double* v : {&m.mean_agt_ms, &m.mean_agt_star_ms, &m.mean_agt_star2_ms, &m.mean_u_ms, &m.mean_l_ms,
                      &m.mean_i_ms, &m.mean_a_ms})
        *v /= n;
    m.accuracy = static_cast<double>(success) / n;
    m.agt1 = static_cast<double>(correct) / n;
    if (correct > 0) m.agt2 = static_cast<double>(executed) / static_cast<double>(correct);
    m.top1 = static_cast<double>(t1) / n;
    m.top3 = static_cast<double>(t3) / n;
    m.top6 = static_cast<double>(t6) / n;
    return m;
}

namespace {

std::string pct(double v) { return fmt::format("{:.1f}%", 100.0 * v); }
std::string secs(double ms) { return fmt::format("{:.1f}s", ms / 1000.0); }

}  // namespace

std::string format_report(const MetricsReport& m, std::string_view title) {
    std::string out = fmt::format("== {} ==\n", title);
    auto row = [&](std::string_view k, const std::string& v) { out += fmt::format("{:<22}{}\n", k, v); };
    row("trials", std::to_string(m.trials));
    row("mean U", secs(m.mean_u_ms));
    row("mean L", secs(m.mean_l_ms));
    row("mean I", secs(m.mean_i_ms));
    row("mean A", secs(m.mean_a_ms));
    row("mean Agt", secs(m.mean_agt_ms));
    row("mean Agt* (U+I+A)", secs(m.mean_agt_star_ms));
    row("mean Agt** (U+I)", secs(m.mean_agt_star2_ms));
    row("accuracy", pct(m.accuracy));
    row("Agt1 intent", pct(m.agt1));
    row("Agt2 execution", m.agt2 ? pct(*m.agt2) : std::string("n/a"));
    out += fmt::format("\n| {:<20} | {:<15} | {:<10} | {:<10} | {:<13} |\n", "backend", "1st Intent Acc.", "Top-3 Acc.",
                       "Top-6 Acc.", "API call time");
    out += fmt::format("| {:<20} | {:<15} | {:<10} | {:<10} | {:<13} |\n", title, pct(m.top1), pct(m.top3),
                       pct(m.top6), secs(m.mean_l_ms));
    return out;
}

std::string format_records(const std::vector<TrialResult>& results, const MetricsReport& m) {
    std::string out;
    for (const auto& r : results) {
        nlohmann::json j{{"task", r.task_id},
                         {"U_ms", r.u_ms},
                         {"L_ms", r.l_ms},
                         {"I_ms", r.i_ms},
                         {"A_ms", r.a_ms},
                         {"Agt_ms", r.agt()},
                         {"rank", r.gt_rank ? nlohmann::json(*r.gt_rank) : nlohmann::json(nullptr)},
                         {"intent_correct", r.intent_correct},
                         {"execution_success", r.execution_success},
                         {"success", r.success},
                         {"execution_status", r.execution_status},
                         {"chosen_intent", r.chosen_intent},
                         {"error", r.error}};
        out += j.dump() + "\n";
    }
    nlohmann::json s{{"summary", true},
                     {"trials", m.trials},
                     {"mean_U_ms", m.mean_u_ms},
                     {"mean_L_ms", m.mean_l_ms},
                     {"mean_I_ms", m.mean_i_ms},
                     {"mean_A_ms", m.mean_a_ms},
                     {"mean_Agt_ms", m.mean_agt_ms},
                     {"mean_Agt_star_ms", m.mean_agt_star_ms},
                     {"mean_Agt_star2_ms", m.mean_agt_star2_ms},
                     {"accuracy", m.accuracy},
                     {"Agt1", m.agt1},
                     {"Agt2", m.agt2 ? nlohmann::json(*m.agt2) : nlohmann::json(nullptr)},
                     {"top1", m.top1},
                     {"top3", m.top3},
                     {"top6", m.top6}};
    return out + s.dump() + "\n";
}

AblationReport ablation_report(const std::vector<TrialResult>& full, const std::vector<TrialResult>& gaze_only) {
    std::multiset<std::string> a, b;
    for (const auto& r : full) a.insert(r.task_id);
    for (const auto& r : gaze_only) b.insert(r.task_id);
    if (a != b) throw std::invalid_argument("ablation needs the same task set in both conditions");
    AblationReport r;
    r.full = compute_metrics(full);
    r.gaze_only = compute_metrics(gaze_only);
    r.delta_top1 = r.full.top1 - r.gaze_only.top1;
    r.delta_top3 = r.full.top3 - r.gaze_only.top3;
    r.delta_top6 = r.full.top6 - r.gaze_only.top6;
    return r;
}

std::string format_ablation(const AblationReport& a) {
    auto delta = [](double v) { return fmt::format("{:+.1f}", 100.0 * v); };
    auto ref = [](double v) { return fmt::format("{:.1f}%", v); };
    std::string out = fmt::format("| {:<22} | {:<15} | {:<10} | {:<10} |\n", "condition", "1st Intent Acc.",
                                  "Top-3 Acc.", "Top-6 Acc.");
    auto row = [&](std::string_view name, const std::string& x, const std::string& y, const std::string& z) {
        out += fmt::format("| {:<22} | {:<15} | {:<10} | {:<10} |\n", name, x, y, z);
    };
    row("Gaze Input Only", pct(a.gaze_only.top1), pct(a.gaze_only.top3), pct(a.gaze_only.top6));
    row("Gaze + Hand Motion", pct(a.full.top1), pct(a.full.top3), pct(a.full.top6));
    row("delta", delta(a.delta_top1), delta(a.delta_top3), delta(a.delta_top6));
    row("reference gaze only", ref(kReferenceGazeOnly.top1), ref(kReferenceGazeOnly.top3), ref(kReferenceGazeOnly.top6));
    row("reference gaze + hand", ref(kReferenceFull.top1), ref(kReferenceFull.top3), ref(kReferenceFull.top6));
    row("reference delta", fmt::format("{:+.1f}", kReferenceFull.top1 - kReferenceGazeOnly.top1),
        fmt::format("{:+.1f}", kReferenceFull.top3 - kReferenceGazeOnly.top3),
        fmt::format("{:+.1f}", kReferenceFull.top6 - kReferenceGazeOnly.top6));
    return out;
}

}  // namespace siagent::harness
