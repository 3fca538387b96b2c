#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <gtest/gtest.h>

#include "siagent/core/error.hpp"
#include "siagent/llm/http_backend.hpp"
#include "siagent/llm/mock.hpp"
#include "siagent/llm/prompt.hpp"
#include "siagent/llm/transcript.hpp"
#include "test_support.hpp"

// after Eigen: resolv.h defines _res, which Eigen uses as a parameter name
#include <httplib.h>
#include <json.hpp>

using namespace siagent;
using namespace siagent::llm;

namespace {

/// Local OpenAI-shaped server on an ephemeral port.
class FakeServer {
public:
    explicit FakeServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }
    BackendProfile profile(int max_concurrency = 4) const {
        return {"fake", "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions", "m", "", 2000,
                max_concurrency};
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

void reply(httplib::Response& res, const std::string& content) {
    nlohmann::json j{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
    res.set_content(j.dump(), "application/json");
}

}  // namespace

TEST(Prompt, SlotsInOrderAndRender) {
    PromptTemplate t("p", "Hi {{name}}, {{greeting}} {{name}}!");
    EXPECT_EQ(t.slots(), (std::vector<std::string>{"name", "greeting"}));
    EXPECT_EQ(t.render({{"name", "Ann"}, {"greeting", "hello"}}), "Hi Ann, hello Ann!");
}

TEST(Prompt, UnfilledSlotIsConfigError) {
    PromptTemplate t("p", "{{a}} {{b}}");
    try {
        t.render({{"a", "1"}});
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("{{b}}"), std::string::npos);
    }
}

TEST(Prompt, ShippedTemplatesLoad) {
    for (const char* n : {"gaze_description", "hand_description", "finger_description", "intent", "execution"}) {
        auto t = load_prompt(n);
        EXPECT_FALSE(t.slots().empty()) << n;
    }
}

TEST(Fingerprint, DependsOnStageAndSlotsOnly) {
    SlotMap s{{"a", "1"}, {"b", "2"}};
    EXPECT_EQ(fingerprint(Stage::Intent, s), fingerprint(Stage::Intent, SlotMap{{"b", "2"}, {"a", "1"}}));
    EXPECT_NE(fingerprint(Stage::Intent, s), fingerprint(Stage::Execution, s));
    EXPECT_NE(fingerprint(Stage::Intent, s), fingerprint(Stage::Intent, SlotMap{{"a", "1"}, {"b", "3"}}));
    EXPECT_EQ(fingerprint(Stage::Intent, s).size(), 16u);
}

TEST(Mock, ExactFingerprintThenSubstringMatch) {
    SlotMap slots{{"gaze", "The user gazes at Lamp."}};
    std::vector<ScriptEntry> script{
        {Stage::Intent, "", {{"gaze", "Lamp"}}, "by match", 5, ""},
        {Stage::Intent, fingerprint(Stage::Intent, slots), {}, "by fingerprint", 7, ""},
    };
    ScriptedMock mock(script);
    auto c = mock.complete({Stage::Intent, "prompt", slots});
    EXPECT_EQ(c.text, "by fingerprint");
    EXPECT_EQ(c.record.latency_ms, 7);
    auto d = mock.complete({Stage::Intent, "prompt", {{"gaze", "Lamp is lit"}}});
    EXPECT_EQ(d.text, "by match");
}

TEST(Mock, StrictMissNamesStage) {
    ScriptedMock mock({});
    try {
        mock.complete({Stage::Execution, "p", {}});
        FAIL();
    } catch (const MockMiss& e) {
        EXPECT_NE(std::string(e.what()).find("Execution"), std::string::npos);
    }
    ScriptedMock lax({}, {false, "fallback", 0});
    auto c = lax.complete({Stage::Execution, "p", {}});
    EXPECT_EQ(c.text, "fallback");
    EXPECT_EQ(c.record.outcome, Outcome::MockMiss);
}

TEST(Mock, ReplayIsIdenticalExceptTimestamps) {
    std::vector<ScriptEntry> script{{Stage::GazeDesc, "", {}, "x", 12, ""}};
    auto run = [&] {
        ScriptedMock m(script);
        std::vector<CallRecord> out;
        for (int i = 0; i < 3; ++i) {
            auto r = m.complete({Stage::GazeDesc, "p" + std::to_string(i), {{"k", "v"}}}).record;
            r.timestamp_ms = 0;
            out.push_back(r);
        }
        return out;
    };
    EXPECT_EQ(run(), run());
}

TEST(Mock, ScriptTextRoundTrip) {
    std::vector<ScriptEntry> script{{Stage::Intent, "abcd", {}, "1. x | targets: A | score: 90", 3.5, "n"},
                                    {Stage::HandDesc, "", {{"hand_features", "left"}}, "y", 0, ""}};
    auto text = format_script(script);
    auto back = parse_script(text);
    EXPECT_EQ(format_script(back), text);
    EXPECT_THROW(parse_script("{\"stage\":\"Nope\",\"response\":\"\"}\n"), ParseError);
}

TEST(Transcript, AppendAndReadBack) {
    siagent::testing::TempDir dir;
    TranscriptLog log(dir / "sub" / "t.jsonl");
    CallRecord r{Stage::Intent, "p\nq", "resp", 12.5, "mock", Outcome::Retried, "ff", 99};
    log.append(r);
    log.append(r);
    auto back = TranscriptLog::read(log.path());
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], r);
}

TEST(Profiles, ShippedFileHasExpectedProfiles) {
    for (const char* id : {"glm-4-cloud", "gpt-4o-cloud", "gpt-3.5-turbo-cloud", "local"})
        EXPECT_EQ(find_profile(id).id, id);
    EXPECT_THROW(find_profile("nonexistent"), ConfigError);
    EXPECT_THROW(parse_profiles("{\"profiles\":[{\"id\":\"a\",\"endpoint\":\"http://x\",\"model\":\"m\",\"max_concurrency\":0}]}"),
                 ConfigError);
}

TEST(Http, SuccessfulCompletion) {
    FakeServer server([](const httplib::Request& req, httplib::Response& res) {
        auto j = nlohmann::json::parse(req.body);
        reply(res, "echo: " + j["messages"][0]["content"].get<std::string>());
    });
    HttpBackend b(server.profile());
    auto c = b.complete({Stage::Intent, "hello", {{"s", "v"}}});
    EXPECT_EQ(c.text, "echo: hello");
    EXPECT_EQ(c.record.outcome, Outcome::Ok);
    EXPECT_EQ(c.record.backend_id, "fake");
    EXPECT_EQ(c.record.fingerprint, fingerprint(Stage::Intent, {{"s", "v"}}));
}

TEST(Http, RetriesOnceOnServerError) {
    std::atomic<int> calls{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        if (calls++ == 0) {
            res.status = 503;
            return;
        }
        reply(res, "ok");
    });
    HttpBackend b(server.profile());
    auto c = b.complete({Stage::Intent, "x", {}});
    EXPECT_EQ(c.text, "ok");
    EXPECT_EQ(c.record.outcome, Outcome::Retried);
    EXPECT_EQ(calls.load(), 2);
}

TEST(Http, PersistentServerErrorSurfaces) {
    FakeServer server([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    HttpBackend b(server.profile());
    EXPECT_THROW(b.complete({Stage::Intent, "x", {}}), BackendError);
}

TEST(Http, UnreachableEndpointIsTimeout) {
    httplib::Server probe;
    int port = probe.bind_to_any_port("127.0.0.1");
    probe.stop();  // port now has no listener
    HttpBackend b({"dead", "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", "m", "", 300, 1});
    EXPECT_THROW(b.complete({Stage::Intent, "x", {}}), BackendTimeout);
}

TEST(Http, MissingKeyIsConfigError) {
    ::unsetenv("SIAGENT_TEST_MISSING_KEY");
    HttpBackend b({"k", "http://127.0.0.1:1/x", "m", "SIAGENT_TEST_MISSING_KEY", 100, 1});
    EXPECT_THROW(b.complete({Stage::Intent, "x", {}}), ConfigError);
}

TEST(Http, ConcurrencyLimitIsEnforced) {
    std::atomic<int> in_flight{0}, peak{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        int now = ++in_flight;
        int p = peak.load();
        while (now > p && !peak.compare_exchange_weak(p, now)) {}
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        --in_flight;
        reply(res, "ok");
    });
    HttpBackend b(server.profile(2));
    std::vector<std::thread> ts;
    for (int i = 0; i < 6; ++i) ts.emplace_back([&] { b.complete({Stage::Intent, "x", {}}); });
    for (auto& t : ts) t.join();
    EXPECT_LE(peak.load(), 2);
    EXPECT_GE(peak.load(), 1);
}

TEST(Recording, CapturedEntriesReplayOffline) {
    FakeServer server([](const httplib::Request&, httplib::Response& res) { reply(res, "live answer"); });
    auto rec = std::make_shared<RecordingBackend>(std::make_shared<HttpBackend>(server.profile()));
    Request req{Stage::Execution, "p", {{"intent", "turn on lamp"}}};
    rec->complete(req);
    ScriptedMock replay(rec->entries());
    EXPECT_EQ(replay.complete(req).text, "live answer");
}
