#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "siagent/core/clock.hpp"
#include "siagent/executor/agent.hpp"
#include "siagent/intent/intent.hpp"
#include "siagent/llm/backend.hpp"
#include "siagent/service/session.hpp"
#include "siagent/telemetry/window.hpp"
#include "siagent/translator/translator.hpp"

namespace siagent::service {

struct PipelineOptions {
    std::set<intent::Channel> channels = intent::kAllChannels;
    translator::DescriptionMode descriptions = translator::DescriptionMode::Templated;
    bool llm_planner = true;
    executor::ExecutionConfig execution;
    /// Whole-attempt budget; execution gets whatever U + L + I left of it.
    double pipeline_timeout_ms = 30000.0;
    /// Run translation, recognition and execution on the session's own
    /// worker thread. Off for replays and tests that want inline stages.
    bool async = true;
    /// Append events, transcript and windows under this directory.
    std::optional<std::filesystem::path> record_dir;
};

struct SessionEvent {
    std::uint64_t seq = 0;
    /// stage, window, bundle, candidates, call, plan, progress, done, error
    std::string type;
    /// JSON object text
    std::string data;
};

class Session {
public:
    Session(std::string id, scene::SceneSnapshot scene, std::shared_ptr<llm::Backend> backend, PipelineOptions opts,
            std::shared_ptr<Clock> clock);
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    const std::string& id() const { return id_; }
    std::string backend_id() const { return backend_->id(); }
    const PipelineOptions& options() const { return opts_; }

    Stage stage() const;
    TimingLedger ledger() const;
    std::vector<Transition> history() const;

    // Every mutator throws Conflict when called in the wrong stage.
    void start();
    void push_frame(const telemetry::TelemetryFrame& frame);
    /// Seals the window early. Throws WindowIncomplete below 85 frames, in
    /// which case the session keeps demonstrating with an empty window.
    void stop();
    /// Hands over an already sealed window.
    void submit_window(telemetry::DemonstrationWindow window);
    /// Throws InputError for a rank that is not presented.
    void confirm(const intent::Choice& choice);
    /// Aborts a running execution.
    void cancel();

    std::optional<translator::LinguisticBundle> bundle() const;
    std::vector<intent::IntentCandidate> candidates() const;
    std::vector<intent::IntentCandidate> presented() const;
    bool expanded() const;
    std::optional<intent::IntentCandidate> chosen() const;
    std::optional<executor::ExecutionPlan> plan() const;
    std::optional<executor::AgentRun> run() const;
    std::vector<llm::CallRecord> calls() const;
    scene::SceneSnapshot scene() const;
    std::string error() const;
    std::size_t frames_pending() const;

    /// Events with seq > after. Waits up to `wait` for one to appear.
    std::vector<SessionEvent> events_since(std::uint64_t after, std::chrono::milliseconds wait = {}) const;
    /// Waits until the stage satisfies `pred` and no stage work is queued.
    bool wait_until(const std::function<bool(Stage)>& pred, std::chrono::milliseconds timeout) const;
    bool wait_idle(std::chrono::milliseconds timeout) const;

private:
    void fire(StageEvent e);
    void emit(std::string type, std::string data);
    void record_call(const llm::CallRecord& c);
    void worker_loop();
    void seal_locked(telemetry::DemonstrationWindow window);
    void fail_locked(const std::string& message);
    void run_job(std::function<void()> job);
    void process_window(telemetry::DemonstrationWindow window);
    void execute_chosen();
    void fail(const std::string& message);

    std::string id_;
    std::shared_ptr<llm::Backend> backend_;
    PipelineOptions opts_;
    std::shared_ptr<Clock> clock_;

    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    StageMachine machine_;
    scene::SceneOwner owner_;
    telemetry::WindowAssembler assembler_;
    std::size_t windows_seen_ = 0;
    std::optional<translator::Translation> translation_;
    std::optional<intent::Confirmation> confirmation_;
    std::optional<intent::IntentCandidate> chosen_;
    std::optional<executor::ExecutionPlan> plan_;
    std::optional<executor::AgentRun> run_;
    std::vector<llm::CallRecord> calls_;
    std::vector<SessionEvent> events_;
    std::string error_;
    std::atomic<bool> cancel_{false};

    std::deque<std::function<void()>> jobs_;
    bool busy_ = false;
    bool stopping_ = false;
    std::thread worker_;
};

struct ReplayOutcome {
    std::string session_id;
    Stage stage = Stage::Idle;
    std::optional<translator::LinguisticBundle> bundle;
    std::vector<intent::IntentCandidate> candidates;
    std::optional<intent::IntentCandidate> chosen;
    std::optional<executor::AgentRun> run;
    TimingLedger ledger;
    std::string error;
};

/// Feeds a window through a fresh session on a simulated clock and answers
/// the confirmation with `choices`, a comma list such as "more,5".
ReplayOutcome replay_window(const telemetry::DemonstrationWindow& window, const scene::SceneSnapshot& scene,
                            std::shared_ptr<llm::Backend> backend, PipelineOptions opts, std::string_view choices);

/// First window of a recorded session file. An empty scene id uses the one
/// stored in the file.
ReplayOutcome replay_session_file(const std::filesystem::path& path, std::string_view scene_id,
                                  llm::Backend& backend, PipelineOptions opts, std::string_view choices);

std::string format_replay(const ReplayOutcome& r);

}  // namespace siagent::service
