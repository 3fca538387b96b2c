#include "siagent/llm/transcript.hpp"

#include <fstream>

#include <json.hpp>

#include "siagent/core/error.hpp"
#include "siagent/core/text.hpp"

namespace siagent::llm {

using nlohmann::json;

namespace {
Outcome outcome_from_string(std::string_view s) {
    for (auto o : {Outcome::Ok, Outcome::Retried, Outcome::Timeout, Outcome::Error, Outcome::MockMiss})
        if (to_string(o) == s) return o;
    throw ConfigError("unknown outcome '" + std::string(s) + "'");
}
}  // namespace

std::string to_json_line(const CallRecord& r) {
    json j{{"stage", to_string(r.stage)},
           {"prompt", r.prompt},
           {"response", r.response},
           {"latency_ms", r.latency_ms},
           {"backend_id", r.backend_id},
           {"outcome", to_string(r.outcome)},
           {"fingerprint", r.fingerprint},
           {"timestamp_ms", r.timestamp_ms}};
    return j.dump();
}

CallRecord from_json_line(std::string_view line) {
    auto j = json::parse(line);
    CallRecord r;
    auto stage = stage_from_string(j.at("stage").get<std::string>());
    if (!stage) throw ConfigError("unknown stage in transcript");
    r.stage = *stage;
    r.prompt = j.at("prompt").get<std::string>();
    r.response = j.at("response").get<std::string>();
    r.latency_ms = j.at("latency_ms").get<double>();
    r.backend_id = j.at("backend_id").get<std::string>();
    r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
    return r;
}

TranscriptLog::TranscriptLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void TranscriptLog::append(const CallRecord& record) {
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to transcript " + path_.string());
    out << to_json_line(record) << '\n';
}

std::vector<CallRecord> TranscriptLog::read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read transcript " + path.string());
    std::vector<CallRecord> out;
    std::string line;
    while (std::getline(in, line))
        if (!text::trim(line).empty()) out.push_back(from_json_line(line));
    return out;
}

}  // namespace siagent::llm
