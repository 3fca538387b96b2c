#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "siagent/service/pipeline.hpp"

namespace siagent::service {

struct StoreOptions {
    std::filesystem::path root = "siagent-data";
    std::string default_backend = "mock";
    std::string default_scene = "study_room";
    PipelineOptions pipeline;
    /// Sessions run on a simulated clock: execution finishes without
    /// sleeping. Used by tests.
    bool simulated_clock = false;
};

struct CreateRequest {
    std::string scene_id;
    std::string backend;
    std::optional<std::set<intent::Channel>> channels;
    std::optional<translator::DescriptionMode> descriptions;
    std::optional<bool> llm_planner;
};

/// Owns live sessions and their directories under <root>/sessions/<id>/.
class SessionStore {
public:
    explicit SessionStore(StoreOptions opts);

    std::shared_ptr<Session> create(const CreateRequest& req);
    /// Throws NotFound.
    std::shared_ptr<Session> get(std::string_view id) const;
    std::vector<std::shared_ptr<Session>> list() const;
    /// Newest session currently demonstrating, if any.
    std::shared_ptr<Session> demonstrating() const;

    std::filesystem::path session_dir(std::string_view id) const;
    /// Recorded window files relative to the root.
    std::vector<std::string> recordings() const;
    const StoreOptions& options() const { return opts_; }
    std::shared_ptr<llm::Backend> backend(const std::string& spec);

private:
    StoreOptions opts_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::vector<std::string> order_;
    std::map<std::string, std::shared_ptr<llm::Backend>> backends_;
    std::size_t counter_ = 0;
};

/// JSON session API and event stream over HTTP.
class ApiServer {
public:
    explicit ApiServer(SessionStore& store);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Port 0 binds any free port. Returns the bound port; throws IoError.
    int bind(const std::string& host, int port);
    /// Serves on a background thread.
    void start();
    /// Serves on the calling thread until stop().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct ServerOptions {
    std::string host = "127.0.0.1";
    int http_port = 8080;
    int udp_port = 9870;
    std::filesystem::path root = "siagent-data";
    std::string backend = "mock";
    std::string scene_id = "study_room";
};

/// Runs ingestion and the API until SIGINT or SIGTERM. Returns an exit code.
int run_server(const ServerOptions& opts);

}  // namespace siagent::service
