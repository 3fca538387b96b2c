#pragma once

#include <filesystem>
#include <memory>
#include <semaphore>
#include <string>
#include <vector>

#include "siagent/llm/backend.hpp"

namespace siagent::llm {

struct BackendProfile {
    std::string id;
    std::string endpoint;  // full chat-completions URL
    std::string model;
    /// Name of the environment variable holding the API key. Empty for
    /// unauthenticated local endpoints. The key itself is never stored.
    std::string auth_env;
    int timeout_ms = 60000;
    int max_concurrency = 4;
};

std::vector<BackendProfile> parse_profiles(std::string_view json_text);
std::vector<BackendProfile> load_profiles(const std::filesystem::path& path);
/// Looks the id up in data/backends.json. Throws ConfigError if absent.
BackendProfile find_profile(std::string_view id);

/// OpenAI-compatible chat-completion client. Retries once on a transient
/// transport error; throws BackendTimeout when the endpoint cannot be reached
/// within the profile timeout, BackendError for other failures, and
/// ConfigError when the key variable is unset.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(BackendProfile profile);

    std::string id() const override { return profile_.id; }
    Completion complete(const Request& request) override;

    const BackendProfile& profile() const { return profile_; }

private:
    std::string post_once(const std::string& body, const std::string& key, bool& transient);

    BackendProfile profile_;
    std::string scheme_host_port_;
    std::string path_;
    std::unique_ptr<std::counting_semaphore<64>> limiter_;
};

/// Resolves a backend spec: "mock" / "mock:<script>" for the scripted mock,
/// otherwise a profile id from data/backends.json.
std::shared_ptr<Backend> make_backend(std::string_view spec, const std::filesystem::path& default_script = {});

}  // namespace siagent::llm
