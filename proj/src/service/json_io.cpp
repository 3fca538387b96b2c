#include "siagent/service/json_io.hpp"

namespace siagent::service {

using nlohmann::json;

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json quat(const Quat& q) { return json::array({q.x(), q.y(), q.z(), q.w()}); }

}  // namespace

json to_json(const translator::LinguisticBundle& b) {
    return {{"gaze", b.gaze}, {"hand", b.hand}, {"finger", b.finger}, {"source", translator::to_string(b.source)}};
}

json to_json(const intent::IntentCandidate& c) {
    json j{{"rank", c.rank},
           {"text", c.text},
           {"targets", c.targets},
           {"score", c.score},
           {"highlighted", c.highlighted},
           {"valid", c.valid}};
    if (!c.flag.empty()) j["flag"] = c.flag;
    return j;
}

json to_json(const std::vector<intent::IntentCandidate>& cs) {
    json a = json::array();
    for (const auto& c : cs) a.push_back(to_json(c));
    return a;
}

json to_json(const TimingLedger& l) {
    return {{"u_ms", l.u_ms}, {"l_ms", l.l_ms}, {"i_ms", l.i_ms}, {"a_ms", l.a_ms}, {"agt_ms", l.agt()}};
}

json to_json(const executor::ExecutionStep& s) {
    json j{{"kind", executor::to_string(s.kind)}, {"target", s.target}, {"text", executor::format_step(s)}};
    if (s.movement) {
        j["goal"] = {{"position", vec(s.movement->goal.position)}, {"rotation", quat(s.movement->goal.rotation)}};
        if (s.movement->micro)
            j["micro"] = {{"pattern", s.movement->micro->pattern},
                          {"amplitude", s.movement->micro->amplitude},
                          {"frequency_hz", s.movement->micro->frequency_hz}};
    }
    if (s.trigger) j["effect"] = s.trigger->effect_id;
    return j;
}

json to_json(const executor::ProgressEvent& e) {
    json j{{"step_index", e.step_index}, {"step_count", e.step_count}, {"phase", e.phase},
           {"t_ms", e.t_ms},             {"hand", vec(e.hand)}};
    if (!e.detail.empty()) j["detail"] = e.detail;
    return j;
}

json to_json(const llm::CallRecord& r) {
    return {{"stage", llm::to_string(r.stage)},     {"prompt", r.prompt},
            {"response", r.response},               {"latency_ms", r.latency_ms},
            {"backend", r.backend_id},              {"outcome", llm::to_string(r.outcome)},
            {"fingerprint", r.fingerprint},         {"timestamp_ms", r.timestamp_ms}};
}

json to_json(const scene::SceneSnapshot& s) {
    json objs = json::array();
    for (const auto& o : s.objects()) {
        json effects = json::array();
        for (const auto& e : o.effects) {
            json ej{{"id", e.effect_id}, {"description", e.description}};
            if (e.resulting_state) ej["resulting_state"] = *e.resulting_state;
            effects.push_back(std::move(ej));
        }
        objs.push_back({{"name", o.name},
                        {"position", vec(o.pose.position)},
                        {"rotation", quat(o.pose.rotation)},
                        {"radius", o.bounding_radius},
                        {"mobile", o.mobile},
                        {"state", o.state},
                        {"effects", std::move(effects)}});
    }
    return {{"id", s.id()}, {"version", s.version()}, {"objects", std::move(objs)}};
}

}  // namespace siagent::service
