#include <algorithm>
#include <random>
#include <set>
#include <tuple>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "siagent/core/error.hpp"
#include "siagent/core/paths.hpp"
#include "siagent/llm/mock.hpp"
#include "siagent/service/ingest.hpp"
#include "siagent/service/pipeline.hpp"
#include "siagent/service/server.hpp"
#include "siagent/telemetry/session_file.hpp"
#include "siagent/telemetry/synthesize.hpp"
#include "test_support.hpp"

#include <httplib.h>

using namespace siagent;
using namespace siagent::service;
using nlohmann::json;

namespace {

// The declared graph, written out edge by edge.
const std::set<std::tuple<Stage, StageEvent, Stage>> kEdges = {
    {Stage::Idle, StageEvent::StartDemonstration, Stage::Demonstrating},
    {Stage::Demonstrating, StageEvent::WindowSealed, Stage::Translating},
    {Stage::Translating, StageEvent::Translated, Stage::Recognizing},
    {Stage::Recognizing, StageEvent::Recognized, Stage::Confirming},
    {Stage::Confirming, StageEvent::Confirmed, Stage::Executing},
    {Stage::Confirming, StageEvent::Rejected, Stage::Demonstrating},
    {Stage::Executing, StageEvent::Executed, Stage::Done},
    {Stage::Idle, StageEvent::Fail, Stage::Failed},
    {Stage::Demonstrating, StageEvent::Fail, Stage::Failed},
    {Stage::Translating, StageEvent::Fail, Stage::Failed},
    {Stage::Recognizing, StageEvent::Fail, Stage::Failed},
    {Stage::Confirming, StageEvent::Fail, Stage::Failed},
    {Stage::Executing, StageEvent::Fail, Stage::Failed},
};

std::optional<Stage> oracle_next(Stage from, StageEvent e) {
    for (const auto& [f, ev, to] : kEdges)
        if (f == from && ev == e) return to;
    return std::nullopt;
}

constexpr StageEvent kAllEvents[] = {StageEvent::StartDemonstration, StageEvent::WindowSealed, StageEvent::Translated,
                                     StageEvent::Recognized,         StageEvent::Confirmed,    StageEvent::Rejected,
                                     StageEvent::Executed,           StageEvent::Fail};

std::shared_ptr<llm::Backend> session_mock() {
    return llm::scripted_mock(data_dir() / "mock" / "sessions.jsonl");
}

telemetry::DemonstrationWindow demo(const std::string& tmpl, const scene::SceneSnapshot& s, std::uint64_t seed = 1) {
    return telemetry::synthesize_demo(telemetry::resolve_template(tmpl, s), s, seed);
}

struct Driven {
    std::shared_ptr<SimulatedClock> clock = std::make_shared<SimulatedClock>();
    std::unique_ptr<Session> session;
};

Driven inline_session(const std::string& scene_id, PipelineOptions opts = {}) {
    opts.async = false;
    Driven d;
    d.session = std::make_unique<Session>("t", scene::load_fixture_scene(scene_id), session_mock(), opts, d.clock);
    return d;
}

void feed(Driven& d, const telemetry::DemonstrationWindow& w) {
    for (const auto& f : w.frames()) {
        d.clock->advance(telemetry::kFramePeriodMs);
        d.session->push_frame(f);
    }
}

}  // namespace

// ---- stage machine ----

TEST(StageMachine, MatchesTheDeclaredGraph) {
    for (int s = 0; s <= static_cast<int>(Stage::Failed); ++s)
        for (auto e : kAllEvents) EXPECT_EQ(next_stage(static_cast<Stage>(s), e), oracle_next(static_cast<Stage>(s), e));
}

TEST(StageMachine, RandomEventSequencesStayOnTheGraph) {
    std::mt19937_64 rng(20241);
    std::uniform_int_distribution<int> pick(0, std::size(kAllEvents) - 1);
    std::uniform_real_distribution<double> step(0.0, 500.0);
    int completed = 0;
    for (int round = 0; round < 10000; ++round) {
        StageMachine m(0.0);
        double now = 0.0, u = 0.0, i = 0.0, l = 0.0, a = 0.0;
        Stage current = Stage::Idle;
        double entered = 0.0;
        int len = 1 + static_cast<int>(rng() % 24);
        for (int k = 0; k < len; ++k) {
            now += step(rng);
            auto e = kAllEvents[pick(rng)];
            auto want = oracle_next(current, e);
            if (!want) {
                EXPECT_THROW(m.fire(e, now), Conflict);
                ASSERT_EQ(m.stage(), current);
                continue;
            }
            if (current == Stage::Demonstrating) u += now - entered;
            if (current == Stage::Confirming) i += now - entered;
            if (current == Stage::Translating || current == Stage::Recognizing) {
                double lat = step(rng);
                m.add_latency(lat);
                l += lat;
            }
            if (current == Stage::Executing) {
                double run = step(rng);
                m.add_execution(run);
                a += run;
            }
            ASSERT_EQ(m.fire(e, now), *want);
            current = *want;
            entered = now;
        }
        for (const auto& t : m.history()) ASSERT_TRUE(kEdges.count({t.from, t.event, t.to}));
        if (m.stage() == Stage::Done) {
            ++completed;
            const auto& led = m.ledger();
            EXPECT_DOUBLE_EQ(led.u_ms, u);
            EXPECT_DOUBLE_EQ(led.i_ms, i);
            EXPECT_DOUBLE_EQ(led.l_ms, l);
            EXPECT_DOUBLE_EQ(led.a_ms, a);
            EXPECT_DOUBLE_EQ(led.agt(), led.u_ms + led.l_ms + led.i_ms + led.a_ms);
        }
    }
    EXPECT_GT(completed, 0);
}

TEST(StageMachine, StageNamesRoundTrip) {
    for (int s = 0; s <= static_cast<int>(Stage::Failed); ++s)
        EXPECT_EQ(stage_from_string(to_string(static_cast<Stage>(s))), static_cast<Stage>(s));
    EXPECT_THROW(stage_from_string("Sleeping"), ConfigError);
}

// ---- session pipeline ----

TEST(Session, CompletedSessionLedgerAddsUp) {
    auto d = inline_session("study_room");
    auto& s = *d.session;
    EXPECT_EQ(s.stage(), Stage::Idle);
    s.start();
    feed(d, demo("tap@DeskLamp", s.scene()));
    ASSERT_EQ(s.stage(), Stage::Confirming) << s.error();
    ASSERT_EQ(s.presented().size(), 3u);
    EXPECT_EQ(s.candidates().front().text, "Turn on the desk lamp");

    d.clock->advance(1234.0);
    s.confirm({intent::ChoiceKind::Pick, 1});
    ASSERT_EQ(s.stage(), Stage::Done) << s.error();

    auto led = s.ledger();
    double latency = 0.0;
    for (const auto& c : s.calls()) latency += c.latency_ms;
    EXPECT_NEAR(led.u_ms, 90 * telemetry::kFramePeriodMs, 1e-6);
    EXPECT_DOUBLE_EQ(led.l_ms, latency);
    EXPECT_DOUBLE_EQ(led.i_ms, 1234.0);
    EXPECT_DOUBLE_EQ(led.a_ms, s.run()->elapsed_ms);
    EXPECT_DOUBLE_EQ(led.agt(), led.u_ms + led.l_ms + led.i_ms + led.a_ms);
    EXPECT_EQ(s.scene().find("DeskLamp")->state, "on");
}

TEST(Session, NoneRestartsTheDemonstration) {
    auto d = inline_session("study_room");
    auto& s = *d.session;
    s.start();
    feed(d, demo("tap@DeskLamp", s.scene()));
    ASSERT_EQ(s.stage(), Stage::Confirming);
    s.confirm({intent::ChoiceKind::None, 0});
    EXPECT_EQ(s.stage(), Stage::Demonstrating);
    EXPECT_TRUE(s.candidates().empty());
    feed(d, demo("tap@DeskLamp", s.scene(), 2));
    EXPECT_EQ(s.stage(), Stage::Confirming);
}

TEST(Session, ConfirmOutsideConfirmingConflicts) {
    auto d = inline_session("study_room");
    auto& s = *d.session;
    EXPECT_THROW(s.confirm({intent::ChoiceKind::Pick, 1}), Conflict);
    EXPECT_THROW(s.push_frame(siagent::testing::plain_frame(0)), Conflict);
    s.start();
    EXPECT_THROW(s.start(), Conflict);
    EXPECT_THROW(s.confirm({intent::ChoiceKind::Pick, 1}), Conflict);
}

TEST(Session, MoreExpandsThenRankFiveIsAccepted) {
    auto d = inline_session("study_room");
    auto& s = *d.session;
    s.start();
    feed(d, demo("tap@DeskLamp", s.scene()));
    EXPECT_THROW(s.confirm({intent::ChoiceKind::Pick, 5}), InputError);
    EXPECT_EQ(s.stage(), Stage::Confirming);
    s.confirm({intent::ChoiceKind::More, 0});
    EXPECT_TRUE(s.expanded());
    EXPECT_EQ(s.presented().size(), 6u);
    s.confirm({intent::ChoiceKind::Pick, 5});
    EXPECT_EQ(s.stage(), Stage::Done) << s.error();
}

TEST(Session, ShortWindowKeepsDemonstrating) {
    auto d = inline_session("study_room");
    auto& s = *d.session;
    s.start();
    auto w = demo("tap@DeskLamp", s.scene());
    for (std::size_t i = 0; i < 60; ++i) s.push_frame(w.frames()[i]);
    EXPECT_THROW(s.stop(), WindowIncomplete);
    EXPECT_EQ(s.stage(), Stage::Demonstrating);
    EXPECT_EQ(s.frames_pending(), 0u);
    for (std::size_t i = 0; i < 87; ++i) s.push_frame(w.frames()[i]);
    s.stop();
    EXPECT_EQ(s.stage(), Stage::Confirming);
}

TEST(Session, MockMissFailsTheSession) {
    PipelineOptions o;
    auto d = inline_session("study_room", o);
    auto& s = *d.session;
    s.start();
    s.submit_window(demo("static@Whiteboard", s.scene()));
    EXPECT_EQ(s.stage(), Stage::Failed);
    EXPECT_NE(s.error().find("no scripted response"), std::string::npos) << s.error();
}

TEST(Session, AsyncEventsArriveInOrderAndPersist) {
    siagent::testing::TempDir tmp;
    PipelineOptions o;
    o.record_dir = tmp.path() / "s1";
    auto clock = std::make_shared<SimulatedClock>();
    auto sc = scene::load_fixture_scene("living_kitchen");
    Session s("s1", sc, session_mock(), o, clock);
    s.start();
    auto w = demo("grab-move@Apple+Refrigerator", sc);
    s.submit_window(w);
    ASSERT_TRUE(s.wait_until([](Stage st) { return st == Stage::Confirming || st == Stage::Failed; },
                             std::chrono::seconds(10)));
    ASSERT_EQ(s.stage(), Stage::Confirming) << s.error();
    s.confirm({intent::ChoiceKind::Pick, 1});
    ASSERT_TRUE(s.wait_until([](Stage st) { return st == Stage::Done || st == Stage::Failed; },
                             std::chrono::seconds(10)));
    ASSERT_EQ(s.stage(), Stage::Done) << s.error();

    auto events = s.events_since(0);
    for (std::size_t i = 0; i < events.size(); ++i) EXPECT_EQ(events[i].seq, i + 1);
    auto count = [&](const std::string& type) {
        return std::count_if(events.begin(), events.end(), [&](const auto& e) { return e.type == type; });
    };
    EXPECT_GT(count("progress"), 0);
    EXPECT_EQ(count("done"), 1);
    EXPECT_EQ(count("plan"), 1);
    EXPECT_EQ(events.back().type, "done");
    EXPECT_TRUE(s.events_since(events.size()).empty());

    auto lines = [&](const std::string& f) {
        auto t = siagent::testing::read_file(tmp.path() / "s1" / f);
        return std::count(t.begin(), t.end(), '\n');
    };
    EXPECT_EQ(lines("events.jsonl"), static_cast<long>(events.size()));
    EXPECT_EQ(lines("transcript.jsonl"), static_cast<long>(s.calls().size()));
    EXPECT_EQ(lines("stages.jsonl"), static_cast<long>(s.history().size()));
    auto log = telemetry::load_session(tmp.path() / "s1" / "window-1.session");
    ASSERT_EQ(log.demonstration_windows().size(), 1u);
    EXPECT_EQ(log.demonstration_windows().front().frames(), w.frames());
    EXPECT_EQ(s.scene().find("Refrigerator")->state, "closed");
}

TEST(Session, CancelDuringExecutionFails) {
    auto sc = scene::load_fixture_scene("living_kitchen");
    PipelineOptions o;
    o.execution.tick_hz = 1000.0;
    // Real clock so the run lasts long enough to be cancelled.
    Session s("c", sc, session_mock(), o, std::make_shared<SteadyClock>());
    s.start();
    s.submit_window(demo("grab-move@Apple+Refrigerator", sc));
    ASSERT_TRUE(s.wait_until([](Stage st) { return st == Stage::Confirming; }, std::chrono::seconds(10)));
    s.confirm({intent::ChoiceKind::Pick, 1});
    auto seen = s.events_since(0);
    ASSERT_FALSE(s.events_since(seen.size(), std::chrono::seconds(5)).empty());
    s.cancel();
    ASSERT_TRUE(s.wait_until([](Stage st) { return st == Stage::Failed || st == Stage::Done; },
                             std::chrono::seconds(20)));
    EXPECT_EQ(s.stage(), Stage::Failed);
    EXPECT_EQ(s.run()->status, executor::RunStatus::Aborted);
}

TEST(Session, BudgetLeavesExecutionTheRemainder) {
    PipelineOptions o;
    o.pipeline_timeout_ms = 15000.0;  // U 3000 + L 8000 + I 2500 leaves 1500 ms
    o.llm_planner = true;
    auto d = inline_session("living_kitchen", o);
    auto& s = *d.session;
    s.start();
    s.submit_window(demo("grab-move@Apple+Refrigerator", s.scene()));
    d.clock->advance(2500.0);
    s.confirm({intent::ChoiceKind::Pick, 1});
    EXPECT_EQ(s.stage(), Stage::Failed);
    ASSERT_TRUE(s.run());
    EXPECT_EQ(s.run()->status, executor::RunStatus::TimedOut);
    EXPECT_LE(s.ledger().agt(), o.pipeline_timeout_ms + 1000.0 / o.execution.tick_hz + 1e-6);
}

TEST(Replay, FixtureSessionsReachDone) {
    auto backend = session_mock();
    struct Case {
        const char* file;
        const char* intent;
    };
    for (auto c : {Case{"desk_lamp.session", "Turn on the desk lamp"}, Case{"bottle_shake.session", "Shake the bottle"},
                   Case{"apple_fridge.session", "Put the apple in the refrigerator"}}) {
        auto out = replay_session_file(data_dir() / "sessions" / c.file, "", *backend, {}, "1");
        EXPECT_EQ(out.stage, Stage::Done) << c.file << ": " << out.error;
        ASSERT_TRUE(out.chosen) << c.file;
        EXPECT_EQ(out.chosen->text, c.intent);
        EXPECT_NE(format_replay(out).find("stage: Done"), std::string::npos);
    }
}

// ---- wire format ----

TEST(Wire, FrameRoundTripWithinQuantization) {
    auto sc = scene::load_fixture_scene("living_kitchen");
    auto names = name_table_for(sc);
    auto w = demo("grab-move@Apple+Refrigerator", sc, 4);
    for (const auto& f : w.frames()) {
        auto bytes = encode_frame(f, names);
        ASSERT_EQ(bytes.size(), kFrameBytes);
        auto g = decode_frame(bytes, names);
        EXPECT_EQ(g.seq, f.seq);
        EXPECT_EQ(g.gaze, f.gaze);
        EXPECT_LT((g.head_position - f.head_position).norm(), 1e-5);
        for (auto h : {telemetry::Hand::Left, telemetry::Hand::Right}) {
            const auto &a = f.hand(h), &b = g.hand(h);
            EXPECT_EQ(b.pose.hand, h);
            EXPECT_LT((a.pose.palm_position - b.pose.palm_position).norm(), 1e-5);
            EXPECT_GT(std::abs(a.pose.palm_rotation.dot(b.pose.palm_rotation)), 1.0 - 1e-6);
            for (int k = 0; k < 5; ++k) {
                EXPECT_LE(std::abs(a.fingers.flexion[k] - b.fingers.flexion[k]), 0.5 / 255.0 + 1e-12);
                EXPECT_LE(std::abs(a.fingers.curl[k] - b.fingers.curl[k]), 0.5 / 255.0 + 1e-12);
            }
        }
    }
}

TEST(Wire, MalformedPacketsAreCountedAndSkipped) {
    auto sc = scene::load_fixture_scene("study_room");
    auto names = name_table_for(sc);
    DatagramDecoder dec;
    EXPECT_FALSE(dec.feed(encode_announce(names)));
    EXPECT_EQ(dec.names(), names);
    auto good = encode_frame(siagent::testing::plain_frame(7, "DeskLamp"), names);

    auto truncated = good;
    truncated.resize(60);
    EXPECT_FALSE(dec.feed(truncated));
    EXPECT_EQ(dec.dropped(), 1u);

    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_FALSE(dec.feed(bad_magic));
    auto bad_index = good;
    bad_index[14] = 0xFE;
    bad_index[15] = 0x00;
    EXPECT_FALSE(dec.feed(bad_index));
    auto bad_version = good;
    bad_version[4] = 9;
    EXPECT_FALSE(dec.feed(bad_version));
    EXPECT_EQ(dec.dropped(), 4u);

    auto f = dec.feed(good);
    ASSERT_TRUE(f);
    EXPECT_EQ(f->seq, 7u);
    EXPECT_EQ(f->gaze.target_name, "DeskLamp");
    EXPECT_EQ(dec.decoded(), 1u);

    EXPECT_THROW(encode_frame(siagent::testing::plain_frame(1, "Spaceship"), names), UnknownTarget);
    EXPECT_THROW(decode_announce(std::vector<std::uint8_t>{'S', 'I', 'A', 'N', 1, 3, 0}), InvalidRecord);
}

TEST(Reorder, SwappedPairIsRestored) {
    ReorderBuffer rb(100.0);
    std::vector<std::uint64_t> arrival(90);
    std::iota(arrival.begin(), arrival.end(), 0);
    std::swap(arrival[10], arrival[11]);
    std::vector<std::uint64_t> out;
    for (std::size_t k = 0; k < arrival.size(); ++k)
        for (const auto& f : rb.push(siagent::testing::plain_frame(arrival[k]), k * telemetry::kFramePeriodMs))
            out.push_back(f.seq);
    for (const auto& f : rb.flush()) out.push_back(f.seq);
    std::vector<std::uint64_t> want(90);
    std::iota(want.begin(), want.end(), 0);
    EXPECT_EQ(out, want);
    EXPECT_EQ(rb.late_drops(), 0u);
    EXPECT_EQ(rb.gaps_skipped(), 0u);
}

// Oracle: when each frame arrives less than the hold time after the frame
// it follows in seq order would have, the output is the sorted input.
TEST(Reorder, BoundedDisplacementAlwaysSorts) {
    std::mt19937_64 rng(77);
    for (int round = 0; round < 300; ++round) {
        const std::size_t n = 90;
        std::vector<double> at(n);
        for (std::size_t i = 0; i < n; ++i)
            at[i] = i * telemetry::kFramePeriodMs + std::uniform_real_distribution<double>(0.0, 60.0)(rng);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return at[a] < at[b]; });
        ReorderBuffer rb(100.0);
        std::vector<std::uint64_t> out;
        for (auto i : order)
            for (const auto& f : rb.push(siagent::testing::plain_frame(i), at[i])) out.push_back(f.seq);
        for (const auto& f : rb.flush()) out.push_back(f.seq);
        ASSERT_EQ(out.size(), n);
        ASSERT_TRUE(std::is_sorted(out.begin(), out.end()));
    }
}

TEST(Reorder, LostFrameIsGivenUpAfterTheHold) {
    ReorderBuffer rb(100.0);
    std::vector<std::uint64_t> out;
    auto take = [&](const std::vector<telemetry::TelemetryFrame>& fs) {
        for (const auto& f : fs) out.push_back(f.seq);
    };
    take(rb.push(siagent::testing::plain_frame(0), 0));
    take(rb.push(siagent::testing::plain_frame(2), 66));
    take(rb.push(siagent::testing::plain_frame(3), 99));
    EXPECT_TRUE(out.empty());
    take(rb.poll(150));
    EXPECT_EQ(out, (std::vector<std::uint64_t>{0}));
    take(rb.poll(166));
    EXPECT_EQ(out, (std::vector<std::uint64_t>{0, 2, 3}));
    EXPECT_EQ(rb.gaps_skipped(), 1u);
    take(rb.push(siagent::testing::plain_frame(1), 170));
    EXPECT_EQ(rb.late_drops(), 1u);
}

TEST(Ingest, BoundedQueueDropsOldest) {
    BoundedQueue<int> q(3);
    for (int i = 0; i < 5; ++i) q.push(i);
    EXPECT_EQ(q.overflow(), 2u);
    EXPECT_EQ(q.pop(std::chrono::milliseconds(1)), 2);
    EXPECT_EQ(q.pop(std::chrono::milliseconds(1)), 3);
    EXPECT_EQ(q.pop(std::chrono::milliseconds(1)), 4);
    EXPECT_FALSE(q.pop(std::chrono::milliseconds(1)));
}

TEST(Ingest, UdpLoopbackDeliversFramesInOrder) {
    auto sc = scene::load_fixture_scene("study_room");
    auto names = name_table_for(sc);
    UdpIngestor ing("127.0.0.1", 0, {});
    std::mutex m;
    std::vector<telemetry::TelemetryFrame> got;
    ing.start([&](const telemetry::TelemetryFrame& f) {
        std::lock_guard lk(m);
        got.push_back(f);
    });

    int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(ing.port()));
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    auto put = [&](const std::vector<std::uint8_t>& b) {
        ::sendto(fd, b.data(), b.size(), 0, reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
    };
    auto w = demo("tap@DeskLamp", sc);
    put(encode_announce(names));
    for (std::size_t i = 0; i < w.size(); ++i) {
        put(encode_frame(w.frames()[i], names));
        if (i == 40) put(std::vector<std::uint8_t>(50, 0x41));
        if (i % 10 == 0) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    for (int k = 0; k < 200; ++k) {
        {
            std::lock_guard lk(m);
            if (got.size() >= w.size()) break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ing.stop();
    ::close(fd);
    ASSERT_EQ(got.size(), w.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].seq, w.frames()[i].seq);
        EXPECT_EQ(got[i].gaze.target_name, w.frames()[i].gaze.target_name);
    }
    auto st = ing.stats();
    EXPECT_EQ(st.malformed, 1u);
    EXPECT_EQ(st.announces, 1u);
    EXPECT_EQ(st.decoded, w.size());
}

TEST(Ingest, BindFailureIsAnIoError) {
    UdpIngestor first("127.0.0.1", 0, {});
    EXPECT_THROW(UdpIngestor("127.0.0.1", first.port(), {}), IoError);
}

// ---- HTTP API ----

class Api : public ::testing::Test {
protected:
    void SetUp() override {
        StoreOptions so;
        so.root = tmp.path();
        so.simulated_clock = true;
        store = std::make_unique<SessionStore>(so);
        server = std::make_unique<ApiServer>(*store);
        port = server->bind("127.0.0.1", 0);
        server->start();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_read_timeout(10, 0);
    }
    void TearDown() override { server->stop(); }

    json post(const std::string& path, const json& body, int expect) {
        auto r = client->Post(path, body.dump(), "application/json");
        EXPECT_TRUE(r) << path;
        if (!r) return {};
        EXPECT_EQ(r->status, expect) << path << " " << r->body;
        return json::parse(r->body);
    }
    json get(const std::string& path, int expect = 200) {
        auto r = client->Get(path);
        EXPECT_TRUE(r) << path;
        if (!r) return {};
        EXPECT_EQ(r->status, expect) << path << " " << r->body;
        return json::parse(r->body);
    }
    std::string wait_for(const std::string& id, std::set<std::string> stages) {
        std::string st;
        for (int k = 0; k < 500; ++k) {
            st = get("/api/sessions/" + id)["stage"];
            if (stages.count(st)) return st;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        return st;
    }

    siagent::testing::TempDir tmp;
    std::unique_ptr<SessionStore> store;
    std::unique_ptr<ApiServer> server;
    std::unique_ptr<httplib::Client> client;
    int port = 0;
};

TEST_F(Api, CreateReturnsIdleSession) {
    auto s = post("/api/sessions", {{"scene", "study_room"}}, 201);
    EXPECT_EQ(s["stage"], "Idle");
    EXPECT_FALSE(s["id"].get<std::string>().empty());
    EXPECT_TRUE(std::filesystem::exists(tmp.path() / "sessions" / s["id"].get<std::string>() / "meta.json"));
    auto all = get("/api/sessions");
    ASSERT_EQ(all.size(), 1u);
    EXPECT_EQ(all[0]["id"], s["id"]);
}

TEST_F(Api, ErrorsMapToStatusCodes) {
    get("/api/sessions/s9999", 404);
    auto id = post("/api/sessions", json::object(), 201)["id"].get<std::string>();
    auto e = post("/api/sessions/" + id + "/confirm", {{"choice", 1}}, 409);
    EXPECT_EQ(e["kind"], "Conflict");
    post("/api/sessions/" + id + "/stop", json::object(), 409);
    post("/api/sessions", {{"scene", "moon_base"}}, 400);
    post("/api/sessions", {{"channels", "smell"}}, 400);
    auto r = client->Post("/api/sessions", "{not json", "application/json");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 400);
    get("/api/sessions/" + id + "/candidates", 404);
}

TEST_F(Api, RankTwoConfirmationExecutesAndStreamsEvents) {
    auto id = post("/api/sessions", {{"scene", "study_room"}}, 201)["id"].get<std::string>();
    const std::string base = "/api/sessions/" + id;
    EXPECT_EQ(post(base + "/start", json::object(), 200)["stage"], "Demonstrating");
    post(base + "/demo", {{"template", "tap@DeskLamp"}, {"seed", 2}}, 200);
    ASSERT_EQ(wait_for(id, {"Confirming", "Failed"}), "Confirming");

    auto b = get(base + "/bundle");
    EXPECT_NE(b["gaze"].get<std::string>().find("DeskLamp"), std::string::npos);
    auto c = get(base + "/candidates");
    EXPECT_EQ(c["presented"].size(), 3u);
    EXPECT_EQ(c["all"].size(), 6u);
    EXPECT_TRUE(c["presented"][0]["highlighted"].get<bool>());
    post(base + "/confirm", {{"choice", "7"}}, 400);

    auto after = post(base + "/confirm", {{"choice", 2}}, 200);
    EXPECT_TRUE(after["stage"] == "Executing" || after["stage"] == "Done") << after.dump();
    EXPECT_EQ(after["chosen"]["rank"], 2);
    ASSERT_EQ(wait_for(id, {"Done", "Failed"}), "Done");

    std::string stream;
    auto r = client->Get(base + "/events", [&](const char* data, std::size_t n) {
        stream.append(data, n);
        return true;
    });
    ASSERT_TRUE(r);
    EXPECT_EQ(r->get_header_value("Content-Type"), "text/event-stream");
    EXPECT_NE(stream.find("event: progress"), std::string::npos);
    EXPECT_NE(stream.find("event: done"), std::string::npos);
    EXPECT_NE(stream.find("\"stage\":\"Executing\""), std::string::npos);

    auto evs = get(base + "/events.json?after=0");
    std::vector<std::string> stages;
    for (const auto& e : evs)
        if (e["type"] == "stage") stages.push_back(e["data"]["stage"]);
    EXPECT_EQ(stages, (std::vector<std::string>{"Demonstrating", "Translating", "Recognizing", "Confirming",
                                                 "Executing", "Done"}));

    auto transcript = get(base + "/transcript");
    ASSERT_GE(transcript.size(), 2u);
    EXPECT_EQ(transcript[0]["stage"], "Intent");
    auto scene = get(base + "/scene");
    EXPECT_EQ(scene["id"], "study_room");
    auto led = get(base)["ledger"];
    EXPECT_DOUBLE_EQ(led["agt_ms"].get<double>(), led["u_ms"].get<double>() + led["l_ms"].get<double>() +
                                                       led["i_ms"].get<double>() + led["a_ms"].get<double>());
}

TEST_F(Api, NoneReturnsToDemonstrating) {
    auto id = post("/api/sessions", {{"scene", "bedroom"}}, 201)["id"].get<std::string>();
    const std::string base = "/api/sessions/" + id;
    post(base + "/start", json::object(), 200);
    post(base + "/demo", {{"template", "shake@Bottle"}}, 200);
    ASSERT_EQ(wait_for(id, {"Confirming", "Failed"}), "Confirming");
    EXPECT_EQ(post(base + "/confirm", {{"choice", "more"}}, 200)["presented"].size(), 6u);
    EXPECT_EQ(post(base + "/confirm", {{"choice", "none"}}, 200)["stage"], "Demonstrating");
}

TEST_F(Api, FramesEndpointSealsTheWindow) {
    auto id = post("/api/sessions", {{"scene", "study_room"}}, 201)["id"].get<std::string>();
    const std::string base = "/api/sessions/" + id;
    post(base + "/start", json::object(), 200);
    auto log = telemetry::load_session(data_dir() / "sessions" / "desk_lamp.session");
    std::string body;
    for (const auto& f : log.frames) body += telemetry::format_frame_line(f) + "\n";
    auto r = client->Post(base + "/frames", body, "text/plain");
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << r->body;
    EXPECT_EQ(json::parse(r->body)["accepted"], 90);
    ASSERT_EQ(wait_for(id, {"Confirming", "Failed"}), "Confirming");
    EXPECT_EQ(get(base + "/candidates")["all"][0]["text"], "Turn on the desk lamp");

    auto rec = get("/api/recordings");
    ASSERT_EQ(rec.size(), 1u);
    auto replay = post("/api/replay", {{"path", rec[0]}, {"choices", "1"}}, 200);
    EXPECT_EQ(replay["stage"], "Done") << replay.dump();
    EXPECT_EQ(replay["chosen"]["text"], "Turn on the desk lamp");
    post("/api/replay", {{"path", "../etc/passwd"}}, 400);
    post("/api/replay", {{"path", "sessions/none.session"}}, 404);
}

TEST_F(Api, FixtureSceneIsServed) {
    auto s = get("/api/scenes/living_kitchen");
    EXPECT_EQ(s["id"], "living_kitchen");
    EXPECT_FALSE(s["objects"].empty());
    get("/api/scenes/moon_base", 404);
}
