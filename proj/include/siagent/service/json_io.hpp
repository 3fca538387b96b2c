#pragma once

#include <json.hpp>

#include "siagent/executor/agent.hpp"
#include "siagent/intent/intent.hpp"
#include "siagent/llm/backend.hpp"
#include "siagent/service/session.hpp"
#include "siagent/translator/translator.hpp"

namespace siagent::service {

nlohmann::json to_json(const translator::LinguisticBundle& b);
nlohmann::json to_json(const intent::IntentCandidate& c);
nlohmann::json to_json(const std::vector<intent::IntentCandidate>& cs);
nlohmann::json to_json(const TimingLedger& l);
nlohmann::json to_json(const executor::ExecutionStep& s);
nlohmann::json to_json(const executor::ProgressEvent& e);
nlohmann::json to_json(const llm::CallRecord& r);
nlohmann::json to_json(const scene::SceneSnapshot& s);

}  // namespace siagent::service
