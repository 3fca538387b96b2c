#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "siagent/llm/backend.hpp"

namespace siagent::llm {

std::string to_json_line(const CallRecord& record);
CallRecord from_json_line(std::string_view line);

/// Append-only transcript, one CallRecord per line.
class TranscriptLog {
public:
    explicit TranscriptLog(std::filesystem::path path);

    void append(const CallRecord& record);
    static std::vector<CallRecord> read(const std::filesystem::path& path);

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::mutex mutex_;
};

}  // namespace siagent::llm
