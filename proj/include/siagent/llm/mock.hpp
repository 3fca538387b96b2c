#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "siagent/llm/backend.hpp"

namespace siagent::llm {

/// One canned answer. An entry matches a request of the same stage either
/// by exact fingerprint or, when `fingerprint` is empty, by requiring every
/// `match` slot to contain the given substring. A needle starting with '='
/// must equal the slot value exactly.
struct ScriptEntry {
    Stage stage = Stage::Intent;
    std::string fingerprint;
    std::map<std::string, std::string> match;
    std::string response;
    double latency_ms = 0.0;
    std::string note;
};

struct MockOptions {
    bool strict = true;
    /// Used for misses when not strict.
    std::string default_response;
    /// Added to every entry's own latency; lets offline runs model L.
    double extra_latency_ms = 0.0;
};

std::vector<ScriptEntry> parse_script(std::string_view jsonl);
std::string format_script(const std::vector<ScriptEntry>& entries);
std::vector<ScriptEntry> load_script(const std::filesystem::path& path);
void save_script(const std::vector<ScriptEntry>& entries, const std::filesystem::path& path);

/// Deterministic offline backend. Latencies are reported, never slept.
class ScriptedMock final : public Backend {
public:
    explicit ScriptedMock(std::vector<ScriptEntry> entries, MockOptions options = {}, std::string id = "mock");

    std::string id() const override { return id_; }
    /// Throws MockMiss naming the stage when strict and nothing matches.
    Completion complete(const Request& request) override;

    std::size_t size() const { return entries_.size(); }

private:
    const ScriptEntry* lookup(const Request& request, const std::string& fp) const;

    std::vector<ScriptEntry> entries_;
    MockOptions options_;
    std::string id_;
};

std::shared_ptr<ScriptedMock> scripted_mock(const std::filesystem::path& script, MockOptions options = {});

/// Passes calls through to another backend and keeps a script entry per
/// successful call, so a live run can be replayed offline.
class RecordingBackend final : public Backend {
public:
    explicit RecordingBackend(std::shared_ptr<Backend> inner);

    std::string id() const override { return inner_->id(); }
    Completion complete(const Request& request) override;

    std::vector<ScriptEntry> entries() const;

private:
    std::shared_ptr<Backend> inner_;
    mutable std::mutex mutex_;
    std::vector<ScriptEntry> entries_;
};

}  // namespace siagent::llm
