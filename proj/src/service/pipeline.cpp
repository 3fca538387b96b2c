#include "siagent/service/pipeline.hpp"

#include <fmt/format.h>

#include <fstream>
#include <json.hpp>

#include "siagent/core/error.hpp"
#include "siagent/core/text.hpp"
#include "siagent/harness/batch.hpp"
#include "siagent/scene/scene.hpp"
#include "siagent/service/json_io.hpp"
#include "siagent/telemetry/session_file.hpp"

namespace siagent::service {

using nlohmann::json;

namespace {

void append_line(const std::filesystem::path& path, const std::string& line) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot append to " + path.string());
    out << line << '\n';
}

}  // namespace

Session::Session(std::string id, scene::SceneSnapshot scene, std::shared_ptr<llm::Backend> backend,
                 PipelineOptions opts, std::shared_ptr<Clock> clock)
    : id_(std::move(id)),
      backend_(std::move(backend)),
      opts_(std::move(opts)),
      clock_(clock ? std::move(clock) : std::make_shared<SteadyClock>()),
      machine_(clock_->now_ms()),
      owner_(std::move(scene)) {
    if (!backend_) throw ConfigError("session needs a backend");
    if (opts_.record_dir) std::filesystem::create_directories(*opts_.record_dir);
    if (opts_.async) worker_ = std::thread([this] { worker_loop(); });
}

Session::~Session() {
    {
        std::lock_guard lk(mutex_);
        stopping_ = true;
    }
    cancel_ = true;
    changed_.notify_all();
    if (worker_.joinable()) worker_.join();
}

Stage Session::stage() const {
    std::lock_guard lk(mutex_);
    return machine_.stage();
}

TimingLedger Session::ledger() const {
    std::lock_guard lk(mutex_);
    return machine_.ledger();
}

std::vector<Transition> Session::history() const {
    std::lock_guard lk(mutex_);
    return machine_.history();
}

void Session::emit(std::string type, std::string data) {
    SessionEvent ev{events_.size() + 1, std::move(type), std::move(data)};
    if (opts_.record_dir) {
        json line{{"seq", ev.seq}, {"type", ev.type}, {"data", json::parse(ev.data)}};
        append_line(*opts_.record_dir / "events.jsonl", line.dump());
        if (ev.type == "stage") append_line(*opts_.record_dir / "stages.jsonl", ev.data);
    }
    events_.push_back(std::move(ev));
    changed_.notify_all();
}

void Session::fire(StageEvent e) {
    Stage from = machine_.stage();
    Stage to = machine_.fire(e, clock_->now_ms());
    json d{{"from", to_string(from)},
           {"stage", to_string(to)},
           {"event", to_string(e)},
           {"at_ms", clock_->now_ms()},
           {"ledger", to_json(machine_.ledger())}};
    emit("stage", d.dump());
}

void Session::record_call(const llm::CallRecord& c) {
    calls_.push_back(c);
    auto j = to_json(c);
    if (opts_.record_dir) append_line(*opts_.record_dir / "transcript.jsonl", j.dump());
    emit("call", json{{"stage", j["stage"]}, {"latency_ms", c.latency_ms}, {"outcome", j["outcome"]}}.dump());
}

void Session::fail_locked(const std::string& message) {
    if (!machine_.can_fire(StageEvent::Fail)) return;
    error_ = message;
    emit("error", json{{"message", message}}.dump());
    fire(StageEvent::Fail);
}

void Session::fail(const std::string& message) {
    std::lock_guard lk(mutex_);
    fail_locked(message);
}

void Session::run_job(std::function<void()> job) {
    if (!opts_.async) {
        job();
        return;
    }
    {
        std::lock_guard lk(mutex_);
        jobs_.push_back(std::move(job));
    }
    changed_.notify_all();
}

void Session::worker_loop() {
    std::unique_lock lk(mutex_);
    for (;;) {
        changed_.wait(lk, [&] { return stopping_ || !jobs_.empty(); });
        if (stopping_) return;
        auto job = std::move(jobs_.front());
        jobs_.pop_front();
        busy_ = true;
        lk.unlock();
        job();
        lk.lock();
        busy_ = false;
        changed_.notify_all();
    }
}

void Session::start() {
    std::lock_guard lk(mutex_);
    fire(StageEvent::StartDemonstration);
    assembler_.start();
}

void Session::seal_locked(telemetry::DemonstrationWindow window) {
    ++windows_seen_;
    if (opts_.record_dir)
        telemetry::record_windows({window}, *opts_.record_dir / fmt::format("window-{}.session", windows_seen_),
                                  owner_.snapshot().id(), llm::wall_clock_ms());
    emit("window", json{{"index", windows_seen_}, {"frames", window.size()}, {"duration_ms", window.duration_ms()}}
                       .dump());
    fire(StageEvent::WindowSealed);
}

void Session::push_frame(const telemetry::TelemetryFrame& frame) {
    std::optional<telemetry::DemonstrationWindow> sealed;
    {
        std::lock_guard lk(mutex_);
        if (machine_.stage() != Stage::Demonstrating)
            throw Conflict(fmt::format("session {} is {}, not demonstrating", id_, to_string(machine_.stage())));
        sealed = assembler_.push(frame);
        if (sealed) seal_locked(*sealed);
    }
    if (sealed) run_job([this, w = std::move(*sealed)] { process_window(w); });
}

void Session::stop() {
    telemetry::DemonstrationWindow w;
    {
        std::lock_guard lk(mutex_);
        if (machine_.stage() != Stage::Demonstrating)
            throw Conflict(fmt::format("session {} is {}, not demonstrating", id_, to_string(machine_.stage())));
        try {
            w = assembler_.stop();
        } catch (const WindowIncomplete&) {
            assembler_.start();
            throw;
        }
        seal_locked(w);
    }
    run_job([this, w = std::move(w)] { process_window(w); });
}

void Session::submit_window(telemetry::DemonstrationWindow window) {
    {
        std::lock_guard lk(mutex_);
        if (machine_.stage() != Stage::Demonstrating)
            throw Conflict(fmt::format("session {} is {}, not demonstrating", id_, to_string(machine_.stage())));
        assembler_ = telemetry::WindowAssembler{};
        seal_locked(window);
    }
    run_job([this, w = std::move(window)] { process_window(w); });
}

void Session::process_window(telemetry::DemonstrationWindow window) {
    auto scene = owner_.snapshot();
    try {
        translator::Translator tr({}, opts_.descriptions,
                                  opts_.descriptions == translator::DescriptionMode::Llm ? backend_ : nullptr);
        auto t = tr.translate(window);
        {
            std::lock_guard lk(mutex_);
            if (machine_.stage() != Stage::Translating) return;
            for (const auto& c : t.calls) record_call(c);
            machine_.add_latency(t.latency_ms);
            translation_ = t;
            emit("bundle", to_json(t.bundle).dump());
            fire(StageEvent::Translated);
        }
        auto q = intent::make_query(t, scene, opts_.channels);
        auto rec = intent::recognize(q, *backend_);
        std::lock_guard lk(mutex_);
        if (machine_.stage() != Stage::Recognizing) return;
        for (const auto& c : rec.calls) record_call(c);
        machine_.add_latency(rec.latency_ms);
        confirmation_.emplace(std::move(rec.candidates));
        emit("candidates", json{{"presented", to_json(confirmation_->presented())},
                                {"all", to_json(confirmation_->candidates())},
                                {"expanded", false}}
                               .dump());
        fire(StageEvent::Recognized);
    } catch (const std::exception& e) {
        fail(e.what());
    }
}

void Session::confirm(const intent::Choice& choice) {
    {
        std::lock_guard lk(mutex_);
        if (machine_.stage() != Stage::Confirming || !confirmation_)
            throw Conflict(fmt::format("session {} is {}, nothing to confirm", id_, to_string(machine_.stage())));
        auto res = confirmation_->apply(choice);
        if (!res) {
            emit("candidates", json{{"presented", to_json(confirmation_->presented())},
                                    {"all", to_json(confirmation_->candidates())},
                                    {"expanded", true}}
                                   .dump());
            return;
        }
        if (!res->chosen) {
            translation_.reset();
            confirmation_.reset();
            fire(StageEvent::Rejected);
            assembler_.start();
            return;
        }
        chosen_ = res->chosen;
        fire(StageEvent::Confirmed);
    }
    run_job([this] { execute_chosen(); });
}

void Session::execute_chosen() {
    intent::IntentCandidate chosen;
    {
        std::lock_guard lk(mutex_);
        chosen = *chosen_;
    }
    try {
        auto scene = owner_.snapshot();
        auto planned = executor::generate_plan(chosen, scene, opts_.llm_planner ? backend_.get() : nullptr);
        executor::ExecutionConfig cfg = opts_.execution;
        {
            std::lock_guard lk(mutex_);
            if (machine_.stage() != Stage::Executing) return;
            for (const auto& c : planned.calls) record_call(c);
            machine_.add_latency(planned.latency_ms);
            plan_ = planned.plan;
            json steps = json::array();
            for (const auto& s : planned.plan.steps) steps.push_back(to_json(s));
            emit("plan", json{{"steps", steps}, {"intent", chosen.text}}.dump());
            double remaining = opts_.pipeline_timeout_ms - machine_.ledger().agt();
            if (remaining <= 0.0) {
                fail_locked(fmt::format("budget of {:.0f} ms used up before execution", opts_.pipeline_timeout_ms));
                return;
            }
            cfg.timeout_ms = std::min(cfg.timeout_ms, remaining);
        }
        auto run = executor::execute(
            planned.plan, owner_, *clock_, cfg,
            [this](const executor::ProgressEvent& ev) {
                std::lock_guard lk(mutex_);
                emit("progress", to_json(ev).dump());
            },
            &cancel_);
        std::lock_guard lk(mutex_);
        machine_.add_execution(run.elapsed_ms);
        auto status = run.status;
        auto message = run.message;
        run_ = std::move(run);
        if (status == executor::RunStatus::Succeeded) {
            fire(StageEvent::Executed);
            emit("done", json{{"ledger", to_json(machine_.ledger())}, {"scene_version", owner_.snapshot().version()}}
                             .dump());
        } else {
            fail_locked(fmt::format("{}: {}", executor::to_string(status), message));
        }
    } catch (const std::exception& e) {
        fail(e.what());
    }
}

void Session::cancel() {
    std::lock_guard lk(mutex_);
    if (machine_.stage() == Stage::Executing) {
        cancel_ = true;
        return;
    }
    fail_locked("cancelled");
}

std::optional<translator::LinguisticBundle> Session::bundle() const {
    std::lock_guard lk(mutex_);
    if (!translation_) return std::nullopt;
    return translation_->bundle;
}

std::vector<intent::IntentCandidate> Session::candidates() const {
    std::lock_guard lk(mutex_);
    return confirmation_ ? confirmation_->candidates() : std::vector<intent::IntentCandidate>{};
}

std::vector<intent::IntentCandidate> Session::presented() const {
    std::lock_guard lk(mutex_);
    return confirmation_ ? confirmation_->presented() : std::vector<intent::IntentCandidate>{};
}

bool Session::expanded() const {
    std::lock_guard lk(mutex_);
    return confirmation_ && confirmation_->expanded();
}

std::optional<intent::IntentCandidate> Session::chosen() const {
    std::lock_guard lk(mutex_);
    return chosen_;
}

std::optional<executor::ExecutionPlan> Session::plan() const {
    std::lock_guard lk(mutex_);
    return plan_;
}

std::optional<executor::AgentRun> Session::run() const {
    std::lock_guard lk(mutex_);
    return run_;
}

std::vector<llm::CallRecord> Session::calls() const {
    std::lock_guard lk(mutex_);
    return calls_;
}

scene::SceneSnapshot Session::scene() const { return owner_.snapshot(); }

std::string Session::error() const {
    std::lock_guard lk(mutex_);
    return error_;
}

std::size_t Session::frames_pending() const {
    std::lock_guard lk(mutex_);
    return assembler_.pending();
}

std::vector<SessionEvent> Session::events_since(std::uint64_t after, std::chrono::milliseconds wait) const {
    std::unique_lock lk(mutex_);
    if (wait.count() > 0) changed_.wait_for(lk, wait, [&] { return events_.size() > after || stopping_; });
    if (after >= events_.size()) return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(after), events_.end()};
}

bool Session::wait_until(const std::function<bool(Stage)>& pred, std::chrono::milliseconds timeout) const {
    std::unique_lock lk(mutex_);
    return changed_.wait_for(lk, timeout, [&] { return pred(machine_.stage()) && jobs_.empty() && !busy_; });
}

bool Session::wait_idle(std::chrono::milliseconds timeout) const {
    return wait_until([](Stage) { return true; }, timeout);
}

// ---- replay ----

ReplayOutcome replay_window(const telemetry::DemonstrationWindow& window, const scene::SceneSnapshot& scene,
                            std::shared_ptr<llm::Backend> backend, PipelineOptions opts, std::string_view choices) {
    opts.async = false;
    auto clock = std::make_shared<SimulatedClock>();
    Session s("replay", scene, std::move(backend), std::move(opts), clock);
    const harness::HarnessConfig timing;
    s.start();
    for (const auto& f : window.frames()) {
        if (s.stage() != Stage::Demonstrating) break;
        clock->advance(telemetry::kFramePeriodMs);
        s.push_frame(f);
    }
    if (s.stage() == Stage::Demonstrating) s.stop();
    for (const auto& tok : text::split(choices, ',')) {
        auto t = text::trim(tok);
        if (t.empty()) continue;
        if (s.stage() != Stage::Confirming) break;
        auto c = intent::parse_choice(t);
        clock->advance(c.kind == intent::ChoiceKind::More ? timing.expand_ms : timing.confirm_ms);
        s.confirm(c);
    }
    ReplayOutcome r;
    r.session_id = s.id();
    r.stage = s.stage();
    r.bundle = s.bundle();
    r.candidates = s.candidates();
    r.chosen = s.chosen();
    r.run = s.run();
    r.ledger = s.ledger();
    r.error = s.error();
    return r;
}

ReplayOutcome replay_session_file(const std::filesystem::path& path, std::string_view scene_id, llm::Backend& backend,
                                  PipelineOptions opts, std::string_view choices) {
    auto log = telemetry::load_session(path);
    auto windows = log.demonstration_windows();
    if (windows.empty()) throw InputError(path.string() + " has no demonstration window");
    auto scene = scene::load_fixture_scene(scene_id.empty() ? std::string_view(log.scene_id) : scene_id);
    std::shared_ptr<llm::Backend> shared(&backend, [](llm::Backend*) {});
    return replay_window(windows.front(), scene, shared, std::move(opts), choices);
}

std::string format_replay(const ReplayOutcome& r) {
    std::string out = fmt::format("stage: {}\n", to_string(r.stage));
    if (r.bundle) {
        out += fmt::format("gaze: {}\n", r.bundle->gaze);
        if (!r.bundle->hand.empty()) out += fmt::format("hand: {}\n", r.bundle->hand);
        if (!r.bundle->finger.empty()) out += fmt::format("finger: {}\n", r.bundle->finger);
    }
    if (!r.candidates.empty()) {
        out += "candidates:\n";
        for (const auto& c : r.candidates)
            out += fmt::format("  {}. {} [{}] {}{}\n", c.rank, c.text, text::join(c.targets, ", "), c.score,
                               c.highlighted ? " *" : "");
    }
    if (r.chosen) out += fmt::format("chosen: {}\n", r.chosen->text);
    if (r.run) out += fmt::format("run: {} in {:.0f} ms\n", executor::to_string(r.run->status), r.run->elapsed_ms);
    out += fmt::format("U {:.0f} ms, L {:.0f} ms, I {:.0f} ms, A {:.0f} ms, total {:.0f} ms\n", r.ledger.u_ms,
                       r.ledger.l_ms, r.ledger.i_ms, r.ledger.a_ms, r.ledger.agt());
    if (!r.error.empty()) out += fmt::format("error: {}\n", r.error);
    return out;
}

}  // namespace siagent::service
