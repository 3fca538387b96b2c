#include <random>
#include <set>

#include <gtest/gtest.h>

#include "siagent/core/error.hpp"
#include "siagent/llm/mock.hpp"
#include "siagent/scene/scene.hpp"
#include "siagent/telemetry/synthesize.hpp"
#include "siagent/translator/translator.hpp"
#include "test_support.hpp"

using namespace siagent;
using namespace siagent::translator;
using siagent::testing::plain_frame;
using telemetry::HandState;

namespace {

// Written from the shape definitions, not from the rule file.
HandState oracle_state(const std::array<bool, 5>& flex, const std::array<bool, 5>& curl) {
    auto all = [](const std::array<bool, 5>& a, bool v) {
        for (bool b : a)
            if (b != v) return false;
        return true;
    };
    int curl_extended = 0;
    for (bool c : curl) curl_extended += !c;
    if (all(flex, false)) return HandState::Open;
    if (all(flex, true) && all(curl, true)) return HandState::TightGrip;
    if (all(flex, true) && curl_extended >= 3) return HandState::HalfGrip;
    if (flex[0] && flex[1] && !flex[2] && !flex[3] && !flex[4] && curl[0] && curl[1]) return HandState::TipPinch;
    if (flex[0] && !flex[1] && flex[2] && flex[3] && flex[4] && !curl[1]) return HandState::IndexTap;
    return HandState::Unknown;
}

std::vector<telemetry::TelemetryFrame> gaze_points(const std::vector<std::optional<std::string>>& seq) {
    std::vector<telemetry::TelemetryFrame> out;
    for (std::size_t i = 0; i < seq.size(); ++i) out.push_back(plain_frame(i, seq[i]));
    return out;
}

using T = std::optional<std::string>;
const T A{"A"}, B{"B"}, C{"C"}, N{};

}  // namespace

TEST(FingerStates, All1024VectorsMatchOracle) {
    const auto& rules = HandStateRules::defaults();
    for (int bits = 0; bits < 1024; ++bits) {
        telemetry::FingerJointRecord j;
        std::array<bool, 5> flex{}, curl{};
        for (int i = 0; i < 5; ++i) {
            flex[i] = bits >> i & 1;
            curl[i] = bits >> (5 + i) & 1;
            j.flexion[i] = flex[i] ? 0.8 : 0.2;
            j.curl[i] = curl[i] ? 0.8 : 0.2;
        }
        auto v = encode(j);
        ASSERT_EQ(v.flex, flex);
        ASSERT_EQ(v.curl, curl);
        ASSERT_EQ(rules.classify(v), oracle_state(flex, curl)) << v.flex_bits() << " " << v.curl_bits();
    }
}

TEST(FingerStates, ThresholdIsInclusive) {
    telemetry::FingerJointRecord j;
    j.flexion = {0.5, 0.49999, 0.5, 0.5, 0.5};
    auto v = encode(j);
    EXPECT_EQ(v.flex_bits(), "10111");
    TranslatorConfig cfg;
    cfg.flex_threshold[1] = 0.4;
    EXPECT_EQ(encode(j, cfg).flex_bits(), "11111");
}

TEST(FingerStates, RuleFileParseErrors) {
    EXPECT_THROW(HandStateRules::parse("Open 0000 xxxxx\n"), ParseError);
    EXPECT_THROW(HandStateRules::parse("Waving 00000 xxxxx\n"), ParseError);
    EXPECT_THROW(HandStateRules::parse("Open 00000 xxxxx curl>=2\n"), ParseError);
    auto r = HandStateRules::parse("# c\nTipPinch 11000 11xxx\n");
    EXPECT_EQ(r.rules().size(), 1u);
    EXPECT_EQ(r.classify(FingerStateVector{}), HandState::Unknown);
}

TEST(Gaze, ContinuousAbsorbsShortGlance) {
    auto f = extract_gaze(gaze_points({A, A, B, A, A}));
    EXPECT_EQ(f.pattern, GazePattern::ContinuousOnA);
    ASSERT_EQ(f.segments.size(), 1u);
    EXPECT_EQ(f.segments[0].last, 4u);
}

TEST(Gaze, PatternCases) {
    EXPECT_EQ(extract_gaze(gaze_points({A, A, A, B, B, B})).pattern, GazePattern::ShiftAtoB);
    EXPECT_EQ(extract_gaze(gaze_points({A, A, N, N, N})).pattern, GazePattern::ShiftAtoNone);
    EXPECT_EQ(extract_gaze(gaze_points({N, N, N})).pattern, GazePattern::NoFixation);
    EXPECT_EQ(extract_gaze(gaze_points({A, A, B, B, C, C})).pattern, GazePattern::Other);
    EXPECT_EQ(extract_gaze(gaze_points({A})).pattern, GazePattern::ContinuousOnA);
    EXPECT_EQ(extract_gaze(gaze_points({A, A, B, B, C, C})).targets(), (std::vector<std::string>{"A", "B", "C"}));
    EXPECT_THROW(extract_gaze({}), EmptyWindow);
}

TEST(Gaze, SegmentsPartitionAndRespectMinimumRun) {
    std::mt19937_64 rng(5);
    const std::vector<T> alphabet{A, B, C, N};
    for (int trial = 0; trial < 2000; ++trial) {
        std::size_t n = 1 + rng() % 25;
        std::vector<T> seq;
        for (std::size_t i = 0; i < n; ++i) seq.push_back(alphabet[rng() % 4]);
        auto f = extract_gaze(gaze_points(seq));
        ASSERT_FALSE(f.segments.empty());
        EXPECT_EQ(f.segments.front().first, 0u);
        EXPECT_EQ(f.segments.back().last, n - 1);
        for (std::size_t i = 0; i < f.segments.size(); ++i) {
            ASSERT_LE(f.segments[i].first, f.segments[i].last);
            if (i > 0) {
                ASSERT_EQ(f.segments[i].first, f.segments[i - 1].last + 1);
                ASSERT_NE(f.segments[i].target, f.segments[i - 1].target);
            }
            if (f.segments.size() > 1) {
                ASSERT_GE(f.segments[i].length(), 2u);
            }
        }
    }
}

TEST(HandMotion, NeedsTwoPoints) {
    EXPECT_THROW(extract_hand_motion(gaze_points({A}), Vec3(0, 1.6, 0)), InsufficientData);
}

TEST(HandMotion, DeadZoneAndTrends) {
    auto pts = gaze_points({A, A, A});
    pts[2].right.pose.palm_position += Vec3(-0.049, 0.06, -0.2);
    pts[2].left.pose.palm_position += Vec3(0.2, 0, 0);
    auto f = extract_hand_motion(pts, Vec3(0, 1.6, 0));
    EXPECT_EQ(f.right.direction, (std::array<int, 3>{0, 1, -1}));
    EXPECT_EQ(direction_labels(f.right.direction), (std::vector<std::string>{"upward", "forward"}));
    EXPECT_EQ(f.left.direction, (std::array<int, 3>{1, 0, 0}));
    EXPECT_EQ(f.inter_hand, Trend::Closer);
    EXPECT_FALSE(f.right.rotation_significant);
}

TEST(HandMotion, CumulativeRotationCountsBackAndForth) {
    auto pts = gaze_points({A, A, A, A, A});
    Vec3 axis = Vec3::UnitZ();
    for (std::size_t i = 0; i < pts.size(); ++i)
        pts[i].right.pose.palm_rotation = Quat(Eigen::AngleAxisd(deg_to_rad(i % 2 ? 15.0 : 0.0), axis));
    auto f = extract_hand_motion(pts, Vec3(0, 1.6, 0));
    EXPECT_NEAR(f.right.cumulative_rotation_deg, 60.0, 1e-6);
    EXPECT_TRUE(f.right.rotation_significant);
}

TEST(Describe, StaticGazeOnLamp) {
    auto scene = scene::load_fixture_scene("study_room");
    auto w = telemetry::synthesize_demo(telemetry::resolve_template("static-gaze-lamp", scene), scene, 1);
    auto t = Translator().translate(w);
    EXPECT_EQ(t.bundle.gaze, "The user continuously gazes at DeskLamp.");
    EXPECT_EQ(t.bundle.hand, "Both hands remain still relative to the body.");
    EXPECT_EQ(t.bundle.finger, "Both hands stay open throughout.");
    EXPECT_TRUE(t.calls.empty());
}

TEST(Describe, IndexTapShowsInFingers) {
    auto scene = scene::load_fixture_scene("study_room");
    auto w = telemetry::synthesize_demo(telemetry::resolve_template("index-tap-lamp", scene), scene, 1);
    auto t = Translator().translate(w);
    EXPECT_EQ(t.fingers.right.final_state, HandState::IndexTap);
    EXPECT_NE(t.bundle.finger.find("index tap"), std::string::npos);
}

TEST(Describe, PourRecoversDeclaredFeaturesAcrossSeeds) {
    auto scene = scene::load_fixture_scene("bedroom");
    auto tmpl = telemetry::resolve_template("pour-right-to-left", scene);
    std::optional<LinguisticBundle> first;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto t = Translator().translate(telemetry::synthesize_demo(tmpl, scene, seed));
        EXPECT_EQ(t.gaze.targets(), tmpl.expected.gaze_targets);
        EXPECT_EQ(t.hands.right.direction, tmpl.expected.right_direction);
        EXPECT_EQ(t.hands.right.rotation_significant, tmpl.expected.right_rotation_significant);
        EXPECT_EQ(t.fingers.right.final_state, tmpl.expected.right_final);
        EXPECT_NE(t.bundle.hand.find("right-to-left"), std::string::npos);
        if (!first) first = t.bundle;
        EXPECT_EQ(t.bundle, *first) << "seed " << seed;
    }
}

TEST(Describe, LlmModeUsesBackendPerChannel) {
    std::vector<llm::ScriptEntry> script{
        {llm::Stage::GazeDesc, "", {{"gaze_features", "DeskLamp"}}, " gaze text ", 10, ""},
        {llm::Stage::HandDesc, "", {}, "hand text", 20, ""},
        {llm::Stage::FingerDesc, "", {}, "finger text", 30, ""},
    };
    auto mock = std::make_shared<llm::ScriptedMock>(script);
    Translator tr({}, DescriptionMode::Llm, mock);
    auto scene = scene::load_fixture_scene("study_room");
    auto t = tr.translate(telemetry::synthesize_demo(telemetry::resolve_template("static@DeskLamp", scene), scene, 0));
    EXPECT_EQ(t.bundle, (LinguisticBundle{"gaze text", "hand text", "finger text", DescriptionMode::Llm}));
    EXPECT_NE(t.calls[1].prompt.find("right"), std::string::npos);
    ASSERT_EQ(t.calls.size(), 3u);
    EXPECT_EQ(t.latency_ms, 60);
    EXPECT_EQ(t.calls[0].stage, llm::Stage::GazeDesc);
    EXPECT_NE(t.calls[0].prompt.find("ContinuousOnA"), std::string::npos);

    Translator strict({}, DescriptionMode::Llm, std::make_shared<llm::ScriptedMock>(std::vector<llm::ScriptEntry>{}));
    EXPECT_THROW(strict.translate(telemetry::synthesize_demo(telemetry::resolve_template("static@DeskLamp", scene), scene, 0)),
                 MockMiss);
    EXPECT_THROW(Translator({}, DescriptionMode::Llm, nullptr), ConfigError);
}

namespace {
class FailingBackend : public llm::Backend {
public:
    std::string id() const override { return "down"; }
    llm::Completion complete(const llm::Request&) override { throw BackendError("down"); }
};
}  // namespace

TEST(Describe, FallbackToTemplatedOnBackendError) {
    auto scene = scene::load_fixture_scene("study_room");
    auto w = telemetry::synthesize_demo(telemetry::resolve_template("static@DeskLamp", scene), scene, 0);
    Translator tr({}, DescriptionMode::Llm, std::make_shared<FailingBackend>());
    EXPECT_THROW(tr.translate(w), BackendError);
    tr.set_fallback_on_backend_error(true);
    auto t = tr.translate(w);
    EXPECT_EQ(t.bundle.source, DescriptionMode::Templated);
    EXPECT_EQ(t.bundle, Translator().translate(w).bundle);
}

TEST(Gaze, TrailingUnsampledFramesDoNotMatter) {
    auto scene = scene::load_fixture_scene("bedroom");
    auto w = telemetry::synthesize_demo(telemetry::resolve_template("pour@Bottle+Cup", scene), scene, 2);
    for (std::size_t n = 86; n <= 90; ++n) {
        std::vector<telemetry::TelemetryFrame> head(w.frames().begin(), w.frames().begin() + n);
        auto g = extract_gaze(telemetry::downsample(telemetry::DemonstrationWindow(head)));
        EXPECT_EQ(g, extract_gaze(telemetry::downsample(w))) << n;
    }
}

TEST(HandMotion, TranslationInvariantWithShiftedOrigin) {
    auto scene = scene::load_fixture_scene("bedroom");
    auto w = telemetry::synthesize_demo(telemetry::resolve_template("pour@Bottle+Cup", scene), scene, 2);
    auto pts = telemetry::downsample(w);
    Vec3 off(3.0, -1.0, 7.5);
    auto shifted = pts;
    for (auto& p : shifted) {
        p.head_position += off;
        p.left.pose.palm_position += off;
        p.right.pose.palm_position += off;
    }
    auto a = extract_hand_motion(pts, w.origin_head_position());
    auto b = extract_hand_motion(shifted, w.origin_head_position() + off);
    EXPECT_TRUE(a.right.net_displacement.isApprox(b.right.net_displacement, 1e-9));
    EXPECT_EQ(a.right.direction, b.right.direction);
    EXPECT_EQ(a.inter_hand, b.inter_hand);
    EXPECT_NEAR(a.right_to_head_delta_m, b.right_to_head_delta_m, 1e-9);
}

TEST(HandMotion, RotationFlagFlipsAtThreshold) {
    for (double deg : {44.999, 45.0, 45.001}) {
        auto pts = gaze_points({A, A});
        pts[1].right.pose.palm_rotation = Quat(Eigen::AngleAxisd(deg_to_rad(deg), Vec3::UnitY()));
        auto f = extract_hand_motion(pts, Vec3(0, 1.6, 0));
        EXPECT_EQ(f.right.rotation_significant, f.right.cumulative_rotation_deg >= 45.0) << deg;
    }
    TranslatorConfig cfg;
    auto pts = gaze_points({A, A});
    pts[1].right.pose.palm_rotation = Quat(Eigen::AngleAxisd(deg_to_rad(45.1), Vec3::UnitY()));
    EXPECT_TRUE(extract_hand_motion(pts, Vec3(0, 1.6, 0), cfg).right.rotation_significant);
    pts[1].right.pose.palm_rotation = Quat(Eigen::AngleAxisd(deg_to_rad(44.9), Vec3::UnitY()));
    EXPECT_FALSE(extract_hand_motion(pts, Vec3(0, 1.6, 0), cfg).right.rotation_significant);
}

TEST(HandMotion, HandsConvergeFromHalfMeterToTenCentimeters) {
    auto pts = gaze_points({A, A});
    pts[0].left.pose.palm_position = Vec3(-0.25, 1.2, -0.3);
    pts[0].right.pose.palm_position = Vec3(0.25, 1.2, -0.3);
    pts[1].left.pose.palm_position = Vec3(-0.05, 1.2, -0.3);
    pts[1].right.pose.palm_position = Vec3(0.05, 1.2, -0.3);
    auto f = extract_hand_motion(pts, Vec3(0, 1.6, 0));
    EXPECT_EQ(f.inter_hand, Trend::Closer);
    EXPECT_NEAR(f.inter_hand_delta_m, -0.4, 1e-12);
}

TEST(FingerStates, NamedRulesArePairwiseDisjoint) {
    const auto& rules = HandStateRules::defaults().rules();
    for (int bits = 0; bits < 1024; ++bits) {
        FingerStateVector v;
        for (int i = 0; i < 5; ++i) {
            v.flex[i] = bits >> i & 1;
            v.curl[i] = bits >> (5 + i) & 1;
        }
        std::set<HandState> hit;
        for (const auto& r : rules)
            if (r.matches(v)) hit.insert(r.state);
        EXPECT_LE(hit.size(), 1u) << v.flex_bits() << " " << v.curl_bits();
    }
}

TEST(FingerStates, CanonicalShapes) {
    const auto& rules = HandStateRules::defaults();
    auto vec = [](std::string f, std::string c) {
        FingerStateVector v;
        for (int i = 0; i < 5; ++i) {
            v.flex[i] = f[i] == '1';
            v.curl[i] = c[i] == '1';
        }
        return v;
    };
    EXPECT_EQ(rules.classify(vec("00000", "00000")), HandState::Open);
    EXPECT_EQ(rules.classify(vec("11111", "00000")), HandState::HalfGrip);
    EXPECT_EQ(rules.classify(vec("11111", "11111")), HandState::TightGrip);
    EXPECT_EQ(rules.classify(vec("11000", "11000")), HandState::TipPinch);
    EXPECT_EQ(rules.classify(vec("10111", "10111")), HandState::IndexTap);
}
