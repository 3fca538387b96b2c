#include "siagent/service/server.hpp"

#include <fmt/format.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <thread>

#include "siagent/core/error.hpp"
#include "siagent/core/paths.hpp"
#include "siagent/core/text.hpp"
#include "siagent/llm/http_backend.hpp"
#include "siagent/scene/scene.hpp"
#include "siagent/service/ingest.hpp"
#include "siagent/service/json_io.hpp"
#include "siagent/telemetry/session_file.hpp"
#include "siagent/telemetry/synthesize.hpp"

#include <httplib.h>

namespace siagent::service {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- store ----

namespace {

scene::SceneSnapshot fixture_scene(const std::string& id) {
    if (!fs::exists(data_dir() / "scenes" / (id + ".scene"))) throw NotFound("no scene fixture " + id);
    return scene::load_fixture_scene(id);
}

}  // namespace

SessionStore::SessionStore(StoreOptions opts) : opts_(std::move(opts)) {
    fs::create_directories(opts_.root / "sessions");
}

std::shared_ptr<llm::Backend> SessionStore::backend(const std::string& spec) {
    std::lock_guard lk(mutex_);
    auto it = backends_.find(spec);
    if (it != backends_.end()) return it->second;
    auto b = llm::make_backend(spec, data_dir() / "mock" / "sessions.jsonl");
    backends_[spec] = b;
    return b;
}

fs::path SessionStore::session_dir(std::string_view id) const { return opts_.root / "sessions" / std::string(id); }

std::shared_ptr<Session> SessionStore::create(const CreateRequest& req) {
    auto scene_id = req.scene_id.empty() ? opts_.default_scene : req.scene_id;
    auto backend_spec = req.backend.empty() ? opts_.default_backend : req.backend;
    scene::SceneSnapshot scene;
    try {
        scene = fixture_scene(scene_id);
    } catch (const NotFound& e) {
        throw InputError(e.what());
    }
    auto b = backend(backend_spec);

    PipelineOptions p = opts_.pipeline;
    if (req.channels) p.channels = *req.channels;
    if (req.descriptions) p.descriptions = *req.descriptions;
    if (req.llm_planner) p.llm_planner = *req.llm_planner;

    std::lock_guard lk(mutex_);
    std::string id;
    do {
        id = fmt::format("s{:04}", ++counter_);
    } while (sessions_.count(id) || fs::exists(session_dir(id)));
    p.record_dir = session_dir(id);
    fs::create_directories(*p.record_dir);
    json meta{{"id", id},
              {"scene", scene_id},
              {"backend", backend_spec},
              {"created_ms", llm::wall_clock_ms()},
              {"channels", json::array()},
              {"descriptions", translator::to_string(p.descriptions)},
              {"llm_planner", p.llm_planner}};
    for (auto c : p.channels) meta["channels"].push_back(intent::to_string(c));
    std::ofstream(*p.record_dir / "meta.json") << meta.dump(2) << '\n';

    std::shared_ptr<Clock> clock;
    if (opts_.simulated_clock) clock = std::make_shared<SimulatedClock>();
    auto s = std::make_shared<Session>(id, std::move(scene), std::move(b), std::move(p), std::move(clock));
    sessions_[id] = s;
    order_.push_back(id);
    return s;
}

std::shared_ptr<Session> SessionStore::get(std::string_view id) const {
    std::lock_guard lk(mutex_);
    auto it = sessions_.find(std::string(id));
    if (it == sessions_.end()) throw NotFound(fmt::format("no session {}", id));
    return it->second;
}

std::vector<std::shared_ptr<Session>> SessionStore::list() const {
    std::lock_guard lk(mutex_);
    std::vector<std::shared_ptr<Session>> out;
    for (const auto& id : order_) out.push_back(sessions_.at(id));
    return out;
}

std::shared_ptr<Session> SessionStore::demonstrating() const {
    std::lock_guard lk(mutex_);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        auto& s = sessions_.at(*it);
        if (s->stage() == Stage::Demonstrating) return s;
    }
    return nullptr;
}

std::vector<std::string> SessionStore::recordings() const {
    std::vector<std::string> out;
    auto dir = opts_.root / "sessions";
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".session")
            out.push_back(fs::relative(e.path(), opts_.root).generic_string());
    std::sort(out.begin(), out.end());
    return out;
}

// ---- api ----

namespace {

json session_json(const Session& s) {
    json j{{"id", s.id()},
           {"stage", to_string(s.stage())},
           {"scene", s.scene().id()},
           {"backend", s.backend_id()},
           {"ledger", to_json(s.ledger())},
           {"frames_pending", s.frames_pending()}};
    if (auto b = s.bundle()) j["bundle"] = to_json(*b);
    auto cands = s.candidates();
    if (!cands.empty()) {
        j["presented"] = to_json(s.presented());
        j["expanded"] = s.expanded();
    }
    if (auto c = s.chosen()) j["chosen"] = to_json(*c);
    if (auto p = s.plan()) {
        json steps = json::array();
        for (const auto& st : p->steps) steps.push_back(to_json(st));
        j["plan"] = steps;
    }
    if (auto r = s.run()) j["run"] = {{"status", executor::to_string(r->status)}, {"elapsed_ms", r->elapsed_ms}};
    if (auto e = s.error(); !e.empty()) j["error"] = e;
    return j;
}

json body_json(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) throw InputError("request body must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw InputError(std::string("malformed JSON: ") + e.what());
    }
}

int status_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::Conflict: return 409;
        case ErrorKind::NotFound: return 404;
        case ErrorKind::BackendError:
        case ErrorKind::BackendTimeout:
        case ErrorKind::IoError: return 500;
        default: return 400;
    }
}

void send(httplib::Response& res, const json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

std::string sse_chunk(const SessionEvent& e) {
    return fmt::format("id: {}\nevent: {}\ndata: {}\n\n", e.seq, e.type, e.data);
}

bool terminal(Stage s) { return s == Stage::Done || s == Stage::Failed; }

}  // namespace

struct ApiServer::Impl {
    explicit Impl(SessionStore& s) : store(s) { routes(); }

    SessionStore& store;
    httplib::Server http;
    std::thread thread;
    std::atomic<bool> closing{false};

    void routes();
};

void ApiServer::Impl::routes() {
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const Error& e) {
            send(res, {{"error", e.what()}, {"kind", to_string(e.kind())}}, status_for(e.kind()));
        } catch (const json::exception& e) {
            send(res, {{"error", e.what()}, {"kind", "InputError"}}, 400);
        } catch (const std::exception& e) {
            send(res, {{"error", e.what()}}, 500);
        }
    });
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

    http.Get("/api/health", [](const httplib::Request&, httplib::Response& res) { send(res, {{"ok", true}}); });

    http.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        auto b = body_json(req);
        CreateRequest cr;
        cr.scene_id = b.value("scene", "");
        cr.backend = b.value("backend", "");
        if (b.contains("channels")) cr.channels = intent::parse_channels(b["channels"].get<std::string>());
        if (b.contains("descriptions")) {
            auto d = b["descriptions"].get<std::string>();
            if (d == "templated") cr.descriptions = translator::DescriptionMode::Templated;
            else if (d == "llm") cr.descriptions = translator::DescriptionMode::Llm;
            else throw InputError("descriptions must be templated or llm");
        }
        if (b.contains("planner")) {
            auto p = b["planner"].get<std::string>();
            if (p != "llm" && p != "rules") throw InputError("planner must be llm or rules");
            cr.llm_planner = p == "llm";
        }
        send(res, session_json(*store.create(cr)), 201);
    });

    http.Get("/api/sessions", [this](const httplib::Request&, httplib::Response& res) {
        json a = json::array();
        for (const auto& s : store.list()) a.push_back({{"id", s->id()}, {"stage", to_string(s->stage())}});
        send(res, a);
    });

    http.Get(R"(/api/sessions/([\w-]+))", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, session_json(*store.get(req.matches[1].str())));
    });

    http.Post(R"(/api/sessions/([\w-]+)/start)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = store.get(req.matches[1].str());
        s->start();
        send(res, session_json(*s));
    });

    // Body: session-file frame lines, one per line.
    http.Post(R"(/api/sessions/([\w-]+)/frames)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = store.get(req.matches[1].str());
        std::size_t accepted = 0, lineno = 0;
        for (const auto& line : text::split(req.body, '\n')) {
            ++lineno;
            auto t = text::trim(line);
            if (t.empty() || t.front() == '#') continue;
            telemetry::TelemetryFrame f;
            try {
                f = telemetry::parse_frame_line(t, lineno);
            } catch (const ParseError& e) {
                throw InputError(e.what());
            }
            if (s->stage() != Stage::Demonstrating && accepted > 0) break;
            s->push_frame(f);
            ++accepted;
        }
        send(res, {{"accepted", accepted}, {"stage", to_string(s->stage())}});
    });

    // Synthesizes a demonstration from a motion template and submits it.
    http.Post(R"(/api/sessions/([\w-]+)/demo)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = store.get(req.matches[1].str());
        auto b = body_json(req);
        if (!b.contains("template")) throw InputError("demo needs a template");
        auto scene = s->scene();
        auto tmpl = telemetry::resolve_template(b["template"].get<std::string>(), scene);
        s->submit_window(telemetry::synthesize_demo(tmpl, scene, b.value("seed", std::uint64_t{1})));
        send(res, session_json(*s));
    });

    http.Post(R"(/api/sessions/([\w-]+)/stop)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = store.get(req.matches[1].str());
        s->stop();
        send(res, session_json(*s));
    });

    http.Get(R"(/api/sessions/([\w-]+)/bundle)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = store.get(req.matches[1].str());
        auto b = s->bundle();
        if (!b) throw NotFound("no linguistic bundle yet");
        send(res, to_json(*b));
    });

    http.Get(R"(/api/sessions/([\w-]+)/candidates)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = store.get(req.matches[1].str());
        auto all = s->candidates();
        if (all.empty()) throw NotFound("no candidates yet");
        send(res, {{"presented", to_json(s->presented())}, {"all", to_json(all)}, {"expanded", s->expanded()}});
    });

    http.Post(R"(/api/sessions/([\w-]+)/confirm)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = store.get(req.matches[1].str());
        auto b = body_json(req);
        if (!b.contains("choice")) throw InputError("confirm needs a choice");
        auto& c = b["choice"];
        auto choice = intent::parse_choice(c.is_number() ? std::to_string(c.get<int>()) : c.get<std::string>());
        if (s->stage() != Stage::Confirming)
            throw Conflict(fmt::format("session {} is {}, nothing to confirm", s->id(), to_string(s->stage())));
        s->confirm(choice);
        send(res, session_json(*s));
    });

    http.Post(R"(/api/sessions/([\w-]+)/cancel)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = store.get(req.matches[1].str());
        s->cancel();
        send(res, session_json(*s));
    });

    http.Get(R"(/api/sessions/([\w-]+)/transcript)", [this](const httplib::Request& req, httplib::Response& res) {
        json a = json::array();
        for (const auto& c : store.get(req.matches[1].str())->calls()) a.push_back(to_json(c));
        send(res, a);
    });

    http.Get(R"(/api/sessions/([\w-]+)/scene)", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, to_json(store.get(req.matches[1].str())->scene()));
    });

    // Polling form of the event stream.
    http.Get(R"(/api/sessions/([\w-]+)/events\.json)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = store.get(req.matches[1].str());
        std::uint64_t after = req.has_param("after") ? std::stoull(req.get_param_value("after")) : 0;
        json a = json::array();
        for (const auto& e : s->events_since(after))
            a.push_back({{"seq", e.seq}, {"type", e.type}, {"data", json::parse(e.data)}});
        send(res, a);
    });

    // Server-sent events. The stream ends once the session is finished and
    // every event has been delivered.
    http.Get(R"(/api/sessions/([\w-]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = store.get(req.matches[1].str());
        std::uint64_t after = 0;
        if (req.has_param("after")) after = std::stoull(req.get_param_value("after"));
        else if (req.has_header("Last-Event-ID")) after = std::stoull(req.get_header_value("Last-Event-ID"));
        auto cursor = std::make_shared<std::uint64_t>(after);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [this, s, cursor](std::size_t, httplib::DataSink& sink) {
            if (closing) {
                sink.done();
                return true;
            }
            bool was_terminal = terminal(s->stage());
            auto events = s->events_since(*cursor, std::chrono::milliseconds(250));
            for (const auto& e : events) {
                auto chunk = sse_chunk(e);
                if (!sink.write(chunk.data(), chunk.size())) return false;
                *cursor = e.seq;
            }
            if (events.empty()) {
                if (was_terminal) {
                    sink.done();
                    return true;
                }
                static constexpr char kPing[] = ": ping\n\n";
                if (!sink.write(kPing, sizeof kPing - 1)) return false;
            }
            return true;
        });
    });

    http.Get(R"(/api/scenes/([\w-]+))", [](const httplib::Request& req, httplib::Response& res) {
        send(res, to_json(fixture_scene(req.matches[1].str())));
    });

    http.Get("/api/recordings", [this](const httplib::Request&, httplib::Response& res) {
        send(res, json(store.recordings()));
    });

    http.Post("/api/replay", [this](const httplib::Request& req, httplib::Response& res) {
        auto b = body_json(req);
        auto rel = b.value("path", "");
        if (rel.empty() || rel.find("..") != std::string::npos || fs::path(rel).is_absolute())
            throw InputError("path must name a recording under the data root");
        auto path = store.options().root / rel;
        if (!fs::exists(path)) throw NotFound("no recording " + rel);
        PipelineOptions opts = store.options().pipeline;
        if (b.contains("channels")) opts.channels = intent::parse_channels(b["channels"].get<std::string>());
        auto backend = store.backend(b.value("backend", store.options().default_backend));
        auto out = replay_session_file(path, b.value("scene", ""), *backend, opts, b.value("choices", "1"));
        json j{{"stage", to_string(out.stage)}, {"ledger", to_json(out.ledger)}, {"report", format_replay(out)}};
        if (out.bundle) j["bundle"] = to_json(*out.bundle);
        j["candidates"] = to_json(out.candidates);
        if (out.chosen) j["chosen"] = to_json(*out.chosen);
        if (!out.error.empty()) j["error"] = out.error;
        send(res, j);
    });
}

ApiServer::ApiServer(SessionStore& store) : impl_(std::make_unique<Impl>(store)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
    int bound = port == 0 ? impl_->http.bind_to_any_port(host) : (impl_->http.bind_to_port(host, port) ? port : -1);
    if (bound <= 0) throw IoError(fmt::format("cannot bind http {}:{}", host, port));
    return bound;
}

void ApiServer::start() {
    impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
    impl_->http.wait_until_ready();
}

void ApiServer::run() { impl_->http.listen_after_bind(); }

void ApiServer::stop() {
    if (!impl_) return;
    impl_->closing = true;
    impl_->http.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

// ---- server ----

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

}  // namespace

int run_server(const ServerOptions& opts) {
    StoreOptions so;
    so.root = opts.root;
    so.default_backend = opts.backend;
    so.default_scene = opts.scene_id;
    SessionStore store(so);
    store.backend(opts.backend);

    auto scene = scene::load_fixture_scene(opts.scene_id);
    UdpIngestor udp(opts.host, opts.udp_port, name_table_for(scene));
    udp.start([&store](const telemetry::TelemetryFrame& f) {
        auto s = store.demonstrating();
        if (!s) return;
        try {
            s->push_frame(f);
        } catch (const Error&) {
        }
    });

    ApiServer api(store);
    int port = api.bind(opts.host, opts.http_port);
    api.start();
    std::cout << fmt::format("http on {}:{}, udp on {}:{}, data in {}\n", opts.host, port, opts.host, udp.port(),
                             opts.root.string())
              << std::flush;

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));

    api.stop();
    udp.stop();
    auto st = udp.stats();
    std::cout << fmt::format("received {} datagrams, {} frames, {} malformed, {} overflow, {} late\n", st.received,
                             st.decoded, st.malformed, st.overflow, st.late);
    return 0;
}

}  // namespace siagent::service
