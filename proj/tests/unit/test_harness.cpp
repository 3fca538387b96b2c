#include <algorithm>
#include <random>

#include <fmt/format.h>

#include <gtest/gtest.h>

#include "siagent/core/error.hpp"
#include "siagent/harness/batch.hpp"
#include "siagent/telemetry/synthesize.hpp"
#include "test_support.hpp"

using namespace siagent;
using namespace siagent::harness;

namespace {

TrialResult trial(std::string id, std::optional<int> rank, double u = 0, double l = 0, double i = 0, double a = 0) {
    TrialResult r;
    r.task_id = std::move(id);
    r.gt_rank = rank;
    r.intent_correct = rank.has_value();
    r.execution_success = r.intent_correct;
    r.success = r.execution_success;
    r.u_ms = u;
    r.l_ms = l;
    r.i_ms = i;
    r.a_ms = a;
    return r;
}

std::vector<TrialResult> run_with_mock(const Catalog& c, HarnessConfig cfg) {
    llm::ScriptedMock mock(llm::load_script(default_mock_script(c.name)));
    return run_batch(c.tasks, cfg, mock);
}

}  // namespace

TEST(Catalog, ShippedCatalogsHaveDeclaredSizes) {
    auto main = load_named_catalog("tasks60");
    auto amb = load_named_catalog("ambiguous21");
    ASSERT_EQ(main.tasks.size(), 60u);
    ASSERT_EQ(amb.tasks.size(), 21u);
    std::map<std::string, int> per_scene;
    for (const auto& t : main.tasks) ++per_scene[t.scene_id];
    EXPECT_EQ(per_scene["study_room"], 19);
    EXPECT_EQ(per_scene["bedroom"], 18);
    EXPECT_EQ(per_scene["living_kitchen"], 23);
    EXPECT_TRUE(std::all_of(amb.tasks.begin(), amb.tasks.end(), [](const TaskSpec& t) { return t.ambiguous; }));
    int shared = 0;
    for (const auto& a : amb.tasks)
        shared += std::count_if(main.tasks.begin(), main.tasks.end(), [&](const TaskSpec& t) {
            return t.intent == a.intent && t.template_id == a.template_id && t.setup == a.setup;
        });
    EXPECT_EQ(shared, 11);
}

TEST(Catalog, EveryTaskValidates) {
    for (std::string_view name : {std::string_view("tasks60"), std::string_view("ambiguous21"), kSessionCatalogs}) {
        for (const auto& issue : validate_catalog(load_named_catalog(name)))
            ADD_FAILURE() << name << " " << issue.task_id << ": " << issue.message;
    }
}

TEST(Catalog, RoundTripAndErrors) {
    auto c = load_named_catalog("ambiguous21");
    EXPECT_EQ(parse_catalog(format_catalog(c), c.name).tasks, c.tasks);
    EXPECT_THROW(parse_catalog("T x study_room Trigger 0 tap@DeskLamp Turn on"), ParseError);
    EXPECT_THROW(parse_catalog("T x study_room Poke 0 tap@DeskLamp \"Turn on the desk lamp\""), ParseError);
    EXPECT_THROW(parse_catalog("T x study_room Trigger 0 tap@DeskLamp \"a\"\nT x study_room Trigger 0 tap@DeskLamp \"b\""),
                 ParseError);
    auto bad = parse_catalog("T x study_room Movement 0 static@Whiteboard \"Fetch the whiteboard\"");
    EXPECT_EQ(validate_catalog(bad).size(), 1u);
}

TEST(Catalog, TemplatesRecoverDeclaredFeaturesAcrossSeeds) {
    auto c = load_named_catalog("tasks60");
    auto amb = load_named_catalog("ambiguous21");
    c.tasks.insert(c.tasks.end(), amb.tasks.begin(), amb.tasks.end());
    for (const auto& t : c.tasks) {
        auto s = task_scene(t);
        auto tmpl = telemetry::resolve_template(t.template_id, s);
        std::optional<translator::LinguisticBundle> first;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            translator::Translator tr({}, translator::DescriptionMode::Templated, nullptr);
            auto out = tr.translate(telemetry::synthesize_demo(tmpl, s, seed));
            EXPECT_EQ(out.gaze.targets(), tmpl.expected.gaze_targets) << t.id;
            EXPECT_EQ(out.hands.right.direction, tmpl.expected.right_direction) << t.id;
            EXPECT_EQ(out.hands.left.direction, tmpl.expected.left_direction) << t.id;
            EXPECT_EQ(out.hands.right.rotation_significant, tmpl.expected.right_rotation_significant) << t.id;
            EXPECT_EQ(out.fingers.right.final_state, tmpl.expected.right_final) << t.id;
            EXPECT_EQ(out.fingers.left.final_state, tmpl.expected.left_final) << t.id;
            if (!first) first = out.bundle;
            else EXPECT_EQ(out.bundle.hand, first->hand) << t.id;
        }
    }
}

TEST(Matcher, VerbAndTargets) {
    auto c = load_named_catalog("tasks60");
    const auto& lamp = *std::find_if(c.tasks.begin(), c.tasks.end(), [](auto& t) { return t.id == "s03"; });
    auto s = task_scene(lamp);
    auto cand = [](std::string text, std::vector<std::string> targets) {
        intent::IntentCandidate x;
        x.text = std::move(text);
        x.targets = std::move(targets);
        return x;
    };
    EXPECT_TRUE(intent_matches(cand("Switch the desk lamp on", {"desklamp"}), lamp, s));
    EXPECT_TRUE(intent_matches(cand("turn on the lamp", {}), lamp, s));
    EXPECT_FALSE(intent_matches(cand("Turn off the desk lamp", {"DeskLamp"}), lamp, s));
    EXPECT_FALSE(intent_matches(cand("Turn on the desk lamp", {"DeskLamp", "Laptop"}), lamp, s));
}

TEST(Metrics, DefinitionalArithmetic) {
    auto m = compute_metrics({trial("a", 1, 2000, 5000, 1000, 3000)});
    EXPECT_DOUBLE_EQ(m.mean_agt_ms, 11000);
    EXPECT_DOUBLE_EQ(m.mean_agt_star_ms, 6000);
    EXPECT_DOUBLE_EQ(m.mean_agt_star2_ms, 3000);
    EXPECT_THROW(compute_metrics({}), EmptyBatch);
}

TEST(Metrics, TopKByHand) {
    auto m = compute_metrics({trial("a", 1), trial("b", 2), trial("c", std::nullopt)});
    EXPECT_DOUBLE_EQ(m.top1, 1.0 / 3);
    EXPECT_DOUBLE_EQ(m.top3, 2.0 / 3);
    EXPECT_DOUBLE_EQ(m.top6, 2.0 / 3);
    EXPECT_DOUBLE_EQ(m.agt1, 2.0 / 3);
    ASSERT_TRUE(m.agt2);
    EXPECT_DOUBLE_EQ(*m.agt2, 1.0);
}

TEST(Metrics, PermutationInvariantAndOrdered) {
    std::mt19937 rng(3);
    for (int round = 0; round < 200; ++round) {
        std::vector<TrialResult> rs;
        int n = 1 + static_cast<int>(rng() % 40);
        for (int i = 0; i < n; ++i) {
            std::optional<int> rank;
            if (rng() % 5) rank = 1 + static_cast<int>(rng() % 6);
            rs.push_back(trial("t" + std::to_string(i), rank, rng() % 4000, rng() % 9000, rng() % 3000, rng() % 8000));
            EXPECT_LE(rs.back().agt_star2(), rs.back().agt_star());
            EXPECT_LE(rs.back().agt_star(), rs.back().agt());
        }
        auto a = compute_metrics(rs);
        std::shuffle(rs.begin(), rs.end(), rng);
        auto b = compute_metrics(rs);
        EXPECT_EQ(format_report(a, "x"), format_report(b, "x"));
        EXPECT_LE(a.top1, a.top3);
        EXPECT_LE(a.top3, a.top6);
    }
}

TEST(Metrics, CloudRowFixtureFormatting) {
    // 54 trials: 45 first, 4 more by third, 3 more by sixth, 2 misses
    std::vector<TrialResult> rs;
    for (int i = 0; i < 54; ++i) {
        std::optional<int> rank = i < 45 ? 1 : i < 49 ? 3 : i < 52 ? 5 : std::optional<int>{};
        rs.push_back(trial("t" + std::to_string(i), rank, 3000, 9100, 2500, 4000));
    }
    auto text = format_report(compute_metrics(rs), "glm-4-cloud");
    EXPECT_NE(text.find(fmt::format("| {:<20} | 83.3%           | 90.7%      | 96.3%      | 9.1s          |",
                                    "glm-4-cloud")),
              std::string::npos)
        << text;
    EXPECT_DOUBLE_EQ(kReferenceCloudTasks.top1, 83.3);
}

TEST(Ablation, DeltasByHand) {
    std::vector<TrialResult> full{trial("a", 1), trial("b", 1), trial("c", 2), trial("d", std::nullopt)};
    std::vector<TrialResult> gaze{trial("a", 1), trial("b", 4), trial("c", std::nullopt), trial("d", std::nullopt)};
    auto r = ablation_report(full, gaze);
    EXPECT_DOUBLE_EQ(r.delta_top1, 0.25);
    EXPECT_DOUBLE_EQ(r.delta_top3, 0.5);
    EXPECT_DOUBLE_EQ(r.delta_top6, 0.25);
    auto same = ablation_report(full, full);
    EXPECT_EQ(same.delta_top1, 0.0);
    EXPECT_EQ(same.delta_top6, 0.0);
    EXPECT_NE(format_ablation(r).find("reference delta        | +28.1"), std::string::npos);
    EXPECT_THROW(ablation_report(full, {trial("a", 1)}), std::invalid_argument);
}

TEST(MockScript, ShippedScriptsMatchGenerator) {
    for (std::string_view name : {std::string_view("tasks60"), std::string_view("ambiguous21"), kSessionCatalogs}) {
        auto c = load_named_catalog(name);
        EXPECT_EQ(siagent::testing::read_file(default_mock_script(name)), llm::format_script(synthesize_mock_script(c)))
            << name << ": regenerate with `siagent mock synth " << name << "`";
    }
}

TEST(Batch, Tasks60MockIsDeterministicAndParallelSafe) {
    auto c = load_named_catalog("tasks60");
    HarnessConfig cfg;
    auto a = run_with_mock(c, cfg);
    cfg.parallelism = 4;
    auto b = run_with_mock(c, cfg);
    ASSERT_EQ(a.size(), 60u);
    auto ma = compute_metrics(a), mb = compute_metrics(b);
    EXPECT_EQ(format_records(a, ma), format_records(b, mb));
    for (const auto& r : a) {
        EXPECT_TRUE(r.success) << r.task_id << ": " << r.error;
        EXPECT_LE(r.agt(), cfg.pipeline_timeout_ms) << r.task_id;
    }
}

TEST(Batch, GazeOnlyLosesPrecisionOnAmbiguousSet) {
    auto c = load_named_catalog("ambiguous21");
    HarnessConfig full;
    HarnessConfig gaze;
    gaze.channels = {intent::Channel::Gaze};
    auto r = ablation_report(run_with_mock(c, full), run_with_mock(c, gaze));
    EXPECT_DOUBLE_EQ(r.full.top1, 1.0);
    EXPECT_LT(r.gaze_only.top1, r.full.top1);
}

TEST(Batch, ImmobileMovementTaskFailsAndBatchContinues) {
    auto c = parse_catalog(
        "T x1 living_kitchen Movement 0 grab-move@Refrigerator+Sofa \"Put the refrigerator next to the sofa\"\n"
        "T x2 study_room Trigger 0 tap@DeskLamp \"Turn on the desk lamp\"\n");
    llm::ScriptedMock mock({{llm::Stage::Intent, "", {{"object_states", "Refrigerator"}},
                             "1. Put the refrigerator next to the sofa | targets: Refrigerator, Sofa | score: 91", 10, ""},
                            {llm::Stage::Intent, "", {{"object_states", "DeskLamp"}},
                             "1. Turn on the desk lamp | targets: DeskLamp | score: 95", 10, ""}});
    HarnessConfig cfg;
    cfg.llm_planner = false;
    auto rs = run_batch(c.tasks, cfg, mock);
    ASSERT_EQ(rs.size(), 2u);
    EXPECT_TRUE(rs[0].intent_correct);
    EXPECT_FALSE(rs[0].success);
    EXPECT_EQ(rs[0].execution_status, "Failed");
    EXPECT_TRUE(rs[1].success);
}

TEST(Batch, SlowBackendBlowsTheBudget) {
    auto c = parse_catalog("T x study_room Trigger 0 tap@DeskLamp \"Turn on the desk lamp\"\n");
    llm::ScriptedMock mock({{llm::Stage::Intent, "", {}, "1. Turn on the desk lamp | targets: DeskLamp | score: 95",
                             29000, ""}});
    HarnessConfig cfg;
    cfg.llm_planner = false;
    auto r = run_batch(c.tasks, cfg, mock).front();
    EXPECT_TRUE(r.intent_correct);
    EXPECT_TRUE(r.execution_success);
    EXPECT_FALSE(r.success);
    EXPECT_GT(r.agt(), 30000);
}
