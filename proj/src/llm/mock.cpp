#include "siagent/llm/mock.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "siagent/core/error.hpp"
#include "siagent/core/text.hpp"

namespace siagent::llm {

using nlohmann::json;

std::vector<ScriptEntry> parse_script(std::string_view jsonl) {
    std::vector<ScriptEntry> out;
    std::size_t line_no = 0;
    std::istringstream in{std::string(jsonl)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        json j;
        try {
            j = json::parse(t);
        } catch (const json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        ScriptEntry e;
        auto stage = stage_from_string(j.value("stage", ""));
        if (!stage) throw ParseError(line_no, "missing or unknown stage");
        e.stage = *stage;
        e.fingerprint = j.value("fingerprint", "");
        if (j.contains("match")) e.match = j["match"].get<std::map<std::string, std::string>>();
        if (!j.contains("response")) throw ParseError(line_no, "missing response");
        e.response = j["response"].get<std::string>();
        e.latency_ms = j.value("latency_ms", 0.0);
        e.note = j.value("note", "");
        out.push_back(std::move(e));
    }
    return out;
}

std::string format_script(const std::vector<ScriptEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        json j = json::object();
        j["stage"] = std::string(to_string(e.stage));
        if (!e.fingerprint.empty()) j["fingerprint"] = e.fingerprint;
        if (!e.match.empty()) j["match"] = e.match;
        j["response"] = e.response;
        j["latency_ms"] = e.latency_ms;
        if (!e.note.empty()) j["note"] = e.note;
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<ScriptEntry> load_script(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read mock script " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_script(ss.str());
}

void save_script(const std::vector<ScriptEntry>& entries, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write mock script " + path.string());
    out << format_script(entries);
}

ScriptedMock::ScriptedMock(std::vector<ScriptEntry> entries, MockOptions options, std::string id)
    : entries_(std::move(entries)), options_(std::move(options)), id_(std::move(id)) {}

const ScriptEntry* ScriptedMock::lookup(const Request& request, const std::string& fp) const {
    // exact fingerprints win over substring matches regardless of order
    for (const auto& e : entries_)
        if (e.stage == request.stage && e.fingerprint == fp) return &e;
    for (const auto& e : entries_) {
        if (e.stage != request.stage || !e.fingerprint.empty()) continue;
        bool ok = true;
        for (const auto& [slot, needle] : e.match) {
            auto it = request.slots.find(slot);
            bool hit = it != request.slots.end() &&
                       (needle.starts_with('=') ? it->second == needle.substr(1)
                                                : it->second.find(needle) != std::string::npos);
            if (!hit) {
                ok = false;
                break;
            }
        }
        if (ok) return &e;
    }
    return nullptr;
}

Completion ScriptedMock::complete(const Request& request) {
    Completion c;
    auto& r = c.record;
    r.stage = request.stage;
    r.prompt = request.prompt;
    r.backend_id = id_;
    r.fingerprint = fingerprint(request.stage, request.slots);
    r.timestamp_ms = wall_clock_ms();
    if (const auto* e = lookup(request, r.fingerprint)) {
        r.response = e->response;
        r.latency_ms = e->latency_ms + options_.extra_latency_ms;
        r.outcome = Outcome::Ok;
    } else if (options_.strict) {
        throw MockMiss("no scripted response for stage " + std::string(to_string(request.stage)) +
                       " (fingerprint " + r.fingerprint + ")");
    } else {
        r.response = options_.default_response;
        r.latency_ms = options_.extra_latency_ms;
        r.outcome = Outcome::MockMiss;
    }
    c.text = r.response;
    return c;
}

std::shared_ptr<ScriptedMock> scripted_mock(const std::filesystem::path& script, MockOptions options) {
    return std::make_shared<ScriptedMock>(load_script(script), std::move(options), "mock:" + script.filename().string());
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}

Completion RecordingBackend::complete(const Request& request) {
    auto c = inner_->complete(request);
    ScriptEntry e;
    e.stage = request.stage;
    e.fingerprint = c.record.fingerprint;
    e.response = c.text;
    e.latency_ms = c.record.latency_ms;
    std::lock_guard lock(mutex_);
    entries_.push_back(std::move(e));
    return c;
}

std::vector<ScriptEntry> RecordingBackend::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

}  // namespace siagent::llm
