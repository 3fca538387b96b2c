#include "siagent/translator/hand_state.hpp"

#include <fstream>
#include <mutex>
#include <sstream>

#include "siagent/core/error.hpp"
#include "siagent/core/paths.hpp"
#include "siagent/core/text.hpp"

namespace siagent::translator {

namespace {

std::string bits(const std::array<bool, 5>& b) {
    std::string s;
    for (bool v : b) s.push_back(v ? '1' : '0');
    return s;
}

bool pattern_matches(const std::string& pattern, const std::array<bool, 5>& b) {
    for (int i = 0; i < 5; ++i) {
        char c = pattern[i];
        if (c == 'x') continue;
        if ((c == '1') != b[i]) return false;
    }
    return true;
}

bool valid_pattern(std::string_view p) {
    return p.size() == 5 && p.find_first_not_of("01x") == std::string_view::npos;
}

}  // namespace

std::string FingerStateVector::flex_bits() const { return bits(flex); }
std::string FingerStateVector::curl_bits() const { return bits(curl); }

FingerStateVector encode(const telemetry::FingerJointRecord& j, const TranslatorConfig& cfg) {
    FingerStateVector v;
    for (int i = 0; i < 5; ++i) {
        v.flex[i] = j.flexion[i] >= cfg.flex_threshold[i];
        v.curl[i] = j.curl[i] >= cfg.curl_threshold[i];
    }
    return v;
}

bool HandStateRule::matches(const FingerStateVector& v) const {
    if (!pattern_matches(flex_pattern, v.flex) || !pattern_matches(curl_pattern, v.curl)) return false;
    if (min_curl_extended) {
        int extended = 0;
        for (bool c : v.curl) extended += c ? 0 : 1;
        if (extended < *min_curl_extended) return false;
    }
    return true;
}

HandStateRules::HandStateRules(std::vector<HandStateRule> rules) : rules_(std::move(rules)) {}

HandStateRules HandStateRules::parse(std::string_view text) {
    std::vector<HandStateRule> rules;
    std::size_t line_no = 0;
    for (const auto& raw : text::split(text, '\n')) {
        ++line_no;
        auto line = std::string(text::trim(raw));
        if (auto hash = line.find('#'); hash != std::string::npos) line = std::string(text::trim(line.substr(0, hash)));
        if (line.empty()) continue;
        auto tok = text::split_ws(line);
        if (tok.size() < 3 || tok.size() > 4) throw ParseError(line_no, "expected '<State> <flex> <curl> [condition]'");
        auto state = telemetry::hand_state_from_string(tok[0]);
        if (!state || *state == HandState::Unknown) throw ParseError(line_no, "unknown hand state '" + tok[0] + "'");
        if (!valid_pattern(tok[1]) || !valid_pattern(tok[2]))
            throw ParseError(line_no, "patterns must be five of 0, 1 or x");
        HandStateRule r{*state, tok[1], tok[2], std::nullopt};
        if (tok.size() == 4) {
            constexpr std::string_view key = "curl_extended>=";
            if (!text::starts_with(tok[3], key)) throw ParseError(line_no, "unknown condition '" + tok[3] + "'");
            try {
                r.min_curl_extended = std::stoi(tok[3].substr(key.size()));
            } catch (const std::exception&) {
                throw ParseError(line_no, "bad count in '" + tok[3] + "'");
            }
        }
        rules.push_back(std::move(r));
    }
    return HandStateRules(std::move(rules));
}

HandStateRules HandStateRules::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read hand-state rules " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

const HandStateRules& HandStateRules::defaults() {
    static const HandStateRules rules = load(data_dir() / "hand_states.rules");
    return rules;
}

HandState HandStateRules::classify(const FingerStateVector& v) const {
    for (const auto& r : rules_)
        if (r.matches(v)) return r.state;
    return HandState::Unknown;
}

FingerFeature extract_finger_states(const std::vector<telemetry::TelemetryFrame>& points, const HandStateRules& rules,
                                    const TranslatorConfig& cfg) {
    if (points.empty()) throw EmptyWindow("no points to extract hand states from");
    FingerFeature f;
    auto summarize = [&](telemetry::Hand h, HandStateSummary& s, std::vector<FingerStateVector>& vecs) {
        for (const auto& p : points) {
            auto v = encode(p.hand(h).fingers, cfg);
            auto st = rules.classify(v);
            vecs.push_back(v);
            if (s.transitions.empty() || s.transitions.back() != st) s.transitions.push_back(st);
        }
        s.initial = s.transitions.front();
        s.final_state = s.transitions.back();
    };
    summarize(telemetry::Hand::Left, f.left, f.left_vectors);
    summarize(telemetry::Hand::Right, f.right, f.right_vectors);
    return f;
}

}  // namespace siagent::translator
