#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace siagent::llm {

/// Pipeline stage a call belongs to. Mock scripts and transcripts key on it.
enum class Stage { GazeDesc, HandDesc, FingerDesc, Intent, Execution };

std::string_view to_string(Stage s);
std::optional<Stage> stage_from_string(std::string_view s);

/// Slot values that were substituted into the prompt. Ordered so the
/// fingerprint is stable.
using SlotMap = std::map<std::string, std::string>;

struct Request {
    Stage stage = Stage::Intent;
    std::string prompt;
    SlotMap slots;
};

enum class Outcome { Ok, Retried, Timeout, Error, MockMiss };

std::string_view to_string(Outcome o);

struct CallRecord {
    Stage stage = Stage::Intent;
    std::string prompt;
    std::string response;
    double latency_ms = 0.0;
    std::string backend_id;
    Outcome outcome = Outcome::Ok;
    std::string fingerprint;
    std::int64_t timestamp_ms = 0;  // wall clock at call start

    bool operator==(const CallRecord&) const = default;
};

struct Completion {
    std::string text;
    CallRecord record;
};

/// Everything that talks to a language model goes through this interface.
/// Implementations must be safe to call from several sessions at once.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    virtual Completion complete(const Request& request) = 0;
};

/// Stage plus slot values, hashed. Cosmetic template edits do not change it.
std::string fingerprint(Stage stage, const SlotMap& slots);

std::int64_t wall_clock_ms();

}  // namespace siagent::llm
