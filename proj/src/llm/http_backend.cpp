#include "siagent/llm/http_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "siagent/core/error.hpp"
#include "siagent/core/paths.hpp"
#include "siagent/core/text.hpp"
#include "siagent/llm/mock.hpp"

namespace siagent::llm {

using nlohmann::json;

std::vector<BackendProfile> parse_profiles(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("backends file: ") + e.what());
    }
    std::vector<BackendProfile> out;
    for (const auto& p : j.at("profiles")) {
        BackendProfile b;
        b.id = p.at("id").get<std::string>();
        b.endpoint = p.at("endpoint").get<std::string>();
        b.model = p.at("model").get<std::string>();
        b.auth_env = p.value("auth_env", "");
        b.timeout_ms = p.value("timeout_ms", 60000);
        b.max_concurrency = p.value("max_concurrency", 4);
        if (b.max_concurrency < 1 || b.max_concurrency > 64)
            throw ConfigError("profile " + b.id + ": max_concurrency must be in 1..64");
        if (b.timeout_ms <= 0) throw ConfigError("profile " + b.id + ": timeout_ms must be positive");
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<BackendProfile> load_profiles(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_profiles(ss.str());
}

BackendProfile find_profile(std::string_view id) {
    for (auto& p : load_profiles(data_dir() / "backends.json"))
        if (p.id == id) return p;
    throw ConfigError("unknown backend profile '" + std::string(id) + "'");
}

HttpBackend::HttpBackend(BackendProfile profile) : profile_(std::move(profile)) {
    const auto& url = profile_.endpoint;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("profile " + profile_.id + ": endpoint lacks a scheme");
    auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
    limiter_ = std::make_unique<std::counting_semaphore<64>>(profile_.max_concurrency);
}

std::string HttpBackend::post_once(const std::string& body, const std::string& key, bool& transient) {
    httplib::Client cli(scheme_host_port_);
    auto sec = profile_.timeout_ms / 1000;
    auto usec = (profile_.timeout_ms % 1000) * 1000;
    cli.set_connection_timeout(sec, usec);
    cli.set_read_timeout(sec, usec);
    cli.set_write_timeout(sec, usec);
    httplib::Headers headers;
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
    auto res = cli.Post(path_, headers, body, "application/json");
    if (!res) {
        auto err = res.error();
        transient = true;
        if (err == httplib::Error::Connection || err == httplib::Error::ConnectionTimeout ||
            err == httplib::Error::Read || err == httplib::Error::Write)
            throw BackendTimeout("backend " + profile_.id + " unreachable: " + httplib::to_string(err));
        throw BackendError("backend " + profile_.id + ": " + httplib::to_string(err));
    }
    if (res->status >= 500 || res->status == 429) {
        transient = true;
        throw BackendError("backend " + profile_.id + ": HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
        transient = false;
        throw BackendError("backend " + profile_.id + ": HTTP " + std::to_string(res->status));
    }
    try {
        auto j = json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        transient = false;
        throw BackendError("backend " + profile_.id + ": malformed response: " + e.what());
    }
}

Completion HttpBackend::complete(const Request& request) {
    std::string key;
    if (!profile_.auth_env.empty()) {
        const char* v = std::getenv(profile_.auth_env.c_str());
        if (!v || !*v) throw ConfigError("backend " + profile_.id + ": environment variable " + profile_.auth_env + " is not set");
        key = v;
    }
    json body{{"model", profile_.model},
              {"temperature", 0},
              {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})}};
    auto payload = body.dump();

    Completion c;
    auto& r = c.record;
    r.stage = request.stage;
    r.prompt = request.prompt;
    r.backend_id = profile_.id;
    r.fingerprint = fingerprint(request.stage, request.slots);
    r.timestamp_ms = wall_clock_ms();

    limiter_->acquire();
    struct Release {
        std::counting_semaphore<64>& s;
        ~Release() { s.release(); }
    } release{*limiter_};

    auto t0 = std::chrono::steady_clock::now();
    for (int attempt = 0;; ++attempt) {
        bool transient = false;
        try {
            c.text = post_once(payload, key, transient);
            r.outcome = attempt == 0 ? Outcome::Ok : Outcome::Retried;
            break;
        } catch (const Error&) {
            if (!transient || attempt == 1) throw;
        }
    }
    r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    r.response = c.text;
    return c;
}

std::shared_ptr<Backend> make_backend(std::string_view spec, const std::filesystem::path& default_script) {
    if (spec == "mock") {
        if (default_script.empty()) throw ConfigError("mock backend needs a script");
        return scripted_mock(default_script);
    }
    if (text::starts_with(spec, "mock:")) return scripted_mock(std::filesystem::path(std::string(spec.substr(5))));
    return std::make_shared<HttpBackend>(find_profile(spec));
}

}  // namespace siagent::llm
