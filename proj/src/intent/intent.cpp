#include "siagent/intent/intent.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include <fmt/format.h>

#include "siagent/core/error.hpp"
#include "siagent/core/text.hpp"
#include "siagent/llm/prompt.hpp"

namespace siagent::intent {

std::string_view to_string(Channel c) {
    switch (c) {
        case Channel::Gaze: return "gaze";
        case Channel::Hand: return "hand";
        case Channel::Finger: return "finger";
    }
    return "gaze";
}

std::set<Channel> parse_channels(std::string_view spec) {
    auto s = text::to_lower(text::trim(spec));
    if (s == "full" || s == "all") return kAllChannels;
    std::set<Channel> out;
    for (const auto& part : text::split(s, ',')) {
        auto p = text::trim(part);
        if (p == "gaze") out.insert(Channel::Gaze);
        else if (p == "hand") out.insert(Channel::Hand);
        else if (p == "finger") out.insert(Channel::Finger);
        else throw ConfigError("unknown channel '" + std::string(p) + "'");
    }
    if (!out.contains(Channel::Gaze)) throw ConfigError("the gaze channel is always required");
    return out;
}

IntentQuery make_query(const translator::Translation& t, const scene::SceneSnapshot& scene, std::set<Channel> channels) {
    if (!channels.contains(Channel::Gaze)) throw ConfigError("the gaze channel is always required");
    IntentQuery q;
    q.bundle = t.bundle;
    q.channels = std::move(channels);
    for (const auto& name : t.gaze.targets()) {
        if (std::any_of(q.object_states.begin(), q.object_states.end(), [&](auto& p) { return p.first == name; }))
            continue;
        q.object_states.emplace_back(name, scene.at(name).state);
    }
    return q;
}

llm::SlotMap intent_slots(const IntentQuery& q) {
    std::vector<std::string> desc;
    desc.push_back("Gaze: " + q.bundle.gaze);
    if (q.channels.contains(Channel::Hand)) desc.push_back("Hand motion: " + q.bundle.hand);
    if (q.channels.contains(Channel::Finger)) desc.push_back("Hand shape: " + q.bundle.finger);
    std::vector<std::string> states;
    for (const auto& [name, state] : q.object_states) states.push_back("- " + name + ": " + state);
    if (states.empty()) states.emplace_back("- (no object was gazed at)");
    return {{"descriptions", text::join(desc, "\n")}, {"object_states", text::join(states, "\n")}};
}

std::string build_intent_prompt(const IntentQuery& q) {
    return llm::load_prompt(q.prompt_id).render(intent_slots(q));
}

namespace {

const std::regex& line_pattern() {
    static const std::regex re(
        R"(^\s*(\d+)\s*[.):]\s*(.*?)\s*\|\s*targets?\s*:\s*(.*?)\s*\|\s*(?:score|confidence)\s*:\s*(.*?)\s*$)",
        std::regex::icase);
    return re;
}

std::optional<double> parse_score(std::string s) {
    s = std::string(text::trim(s));
    if (!s.empty() && s.back() == '%') s.pop_back();
    if (s.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace

std::vector<IntentCandidate> parse_intents(std::string_view raw, const std::vector<std::string>& valid_targets) {
    struct Parsed {
        IntentCandidate c;
        std::size_t order;
    };
    std::vector<Parsed> all;
    for (const auto& line : text::split(raw, '\n')) {
        std::smatch m;
        std::string l(text::trim(line));
        if (!std::regex_match(l, m, line_pattern())) continue;
        IntentCandidate c;
        c.text = text::trim(m[2].str());
        if (c.text.empty()) continue;
        for (const auto& t : text::split(m[3].str(), ',')) {
            auto name = std::string(text::trim(t));
            if (name.empty() || text::iequals(name, "none") || name == "-") continue;
            auto it = std::find_if(valid_targets.begin(), valid_targets.end(),
                                   [&](const std::string& v) { return text::iequals(v, name); });
            if (it != valid_targets.end()) {
                c.targets.push_back(*it);
            } else {
                c.targets.push_back(name);
                c.valid = false;
                c.flag = "target '" + name + "' was not gazed at";
            }
        }
        auto score = parse_score(m[4].str());
        if (!score) {
            c.valid = false;
            c.flag = "score '" + m[4].str() + "' is not a number";
            c.score = 0;
        } else {
            c.score = static_cast<int>(std::lround(std::clamp(*score, 0.0, 100.0)));
        }
        all.push_back({std::move(c), all.size()});
    }
    if (all.empty()) throw ParseFailure("no intent line matched '<rank>. <text> | targets: <names> | score: <n>'");

    int min_valid = 100;
    bool any_valid = false;
    for (const auto& p : all)
        if (p.c.valid) {
            min_valid = std::min(min_valid, p.c.score);
            any_valid = true;
        }
    if (any_valid)
        for (auto& p : all)
            if (!p.c.valid) p.c.score = std::min(p.c.score, min_valid);

    std::stable_sort(all.begin(), all.end(), [](const Parsed& a, const Parsed& b) {
        if (a.c.valid != b.c.valid) return a.c.valid;
        return a.c.score > b.c.score;
    });
    std::vector<IntentCandidate> out;
    for (auto& p : all) {
        if (static_cast<int>(out.size()) == kMaxCandidates) break;
        p.c.rank = static_cast<int>(out.size()) + 1;
        p.c.highlighted = p.c.score >= kHighlightScore;
        out.push_back(std::move(p.c));
    }
    return out;
}

Recognition recognize(const IntentQuery& q, llm::Backend& backend) {
    Recognition r;
    std::vector<std::string> valid;
    for (const auto& [name, _] : q.object_states) valid.push_back(name);
    auto tmpl = llm::load_prompt(q.prompt_id);
    auto slots = intent_slots(q);
    for (int attempt = 1;; ++attempt) {
        auto prompt = tmpl.render(slots);
        if (attempt > 1) {
            slots["retry"] = std::to_string(attempt - 1);
            prompt += "\n\nYour previous answer could not be read. Reply with exactly six lines in the format "
                      "'<rank>. <intent> | targets: <names> | score: <0-100>' and nothing else.\n";
        }
        auto c = backend.complete({llm::Stage::Intent, prompt, slots});
        r.calls.push_back(c.record);
        r.latency_ms += c.record.latency_ms;
        try {
            r.candidates = parse_intents(c.text, valid);
            return r;
        } catch (const ParseFailure&) {
            if (attempt == 2) throw;
        }
    }
}

Choice parse_choice(std::string_view s) {
    auto t = text::to_lower(text::trim(s));
    if (t == "more" || t == "expand") return {ChoiceKind::More, 0};
    if (t == "none" || t == "none of these") return {ChoiceKind::None, 0};
    try {
        std::size_t used = 0;
        int r = std::stoi(t, &used);
        if (used == t.size()) return {ChoiceKind::Pick, r};
    } catch (const std::exception&) {
    }
    throw InputError("expected a rank, 'more' or 'none', got '" + std::string(s) + "'");
}

Confirmation::Confirmation(std::vector<IntentCandidate> candidates) : candidates_(std::move(candidates)) {
    if (candidates_.empty()) throw std::invalid_argument("confirmation needs at least one candidate");
}

std::vector<IntentCandidate> Confirmation::presented() const {
    std::size_t n = expanded_ ? candidates_.size() : std::min<std::size_t>(kPresentedInitially, candidates_.size());
    return {candidates_.begin(), candidates_.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::optional<ConfirmationResult> Confirmation::apply(const Choice& c) {
    switch (c.kind) {
        case ChoiceKind::More:
            expanded_ = true;
            return std::nullopt;
        case ChoiceKind::None: return ConfirmationResult{std::nullopt, expanded_, 0.0};
        case ChoiceKind::Pick: break;
    }
    for (const auto& cand : presented())
        if (cand.rank == c.rank) return ConfirmationResult{cand, expanded_, 0.0};
    throw InputError(fmt::format("rank {} is not among the {} presented intents", c.rank, presented().size()));
}

ConfirmationResult confirm(std::vector<IntentCandidate> candidates, const SelectionSource& source, const Clock& clock) {
    Confirmation conf(std::move(candidates));
    const double t0 = clock.now_ms();
    while (auto choice = source()) {
        try {
            if (auto res = conf.apply(*choice)) {
                res->confirm_time_ms = clock.now_ms() - t0;
                return *res;
            }
        } catch (const InputError&) {
            // re-prompt
        }
    }
    throw InputError("selection input ended without a decision");
}

namespace {

struct Span {
    std::size_t begin;
    std::size_t end;  // exclusive
};

std::vector<std::string> normalized_name(std::string_view name) {
    return text::word_tokens(text::join(text::name_tokens(name), " "));
}

std::vector<Span> occurrences(const std::vector<std::string>& toks, const std::vector<std::string>& phrase) {
    std::vector<Span> out;
    if (phrase.empty() || phrase.size() > toks.size()) return out;
    for (std::size_t i = 0; i + phrase.size() <= toks.size(); ++i)
        if (std::equal(phrase.begin(), phrase.end(), toks.begin() + static_cast<std::ptrdiff_t>(i)))
            out.push_back({i, i + phrase.size()});
    return out;
}

}  // namespace

std::vector<std::string> match_object_names(std::string_view sentence, const scene::SceneSnapshot& scene) {
    auto toks = text::word_tokens(sentence);
    struct Hit {
        const scene::SceneObject* obj;
        Span span;
    };
    std::vector<Hit> hits;
    for (const auto& o : scene.objects())
        for (auto sp : occurrences(toks, normalized_name(o.name))) hits.push_back({&o, sp});

    std::vector<std::pair<std::size_t, std::string>> found;
    auto add = [&](std::size_t pos, const std::string& name) {
        for (auto& f : found)
            if (f.second == name) {
                f.first = std::min(f.first, pos);
                return;
            }
        found.emplace_back(pos, name);
    };
    for (const auto& h : hits) {
        bool shadowed = std::any_of(hits.begin(), hits.end(), [&](const Hit& o) {
            return o.obj != h.obj && o.span.begin <= h.span.begin && o.span.end >= h.span.end &&
                   (o.span.end - o.span.begin) > (h.span.end - h.span.begin);
        });
        if (!shadowed) add(h.span.begin, h.obj->name);
    }
    if (found.empty()) {
        // head noun only: "the lamp" for DeskLamp
        for (const auto& o : scene.objects()) {
            auto name = normalized_name(o.name);
            if (name.size() < 2) continue;
            auto occ = occurrences(toks, {name.back()});
            if (!occ.empty()) add(occ.front().begin, o.name);
        }
    }
    std::stable_sort(found.begin(), found.end(), [](auto& a, auto& b) { return a.first < b.first; });
    std::vector<std::string> out;
    for (auto& f : found) out.push_back(std::move(f.second));
    return out;
}

TextIntent intent_from_text(std::string_view sentence, const scene::SceneSnapshot& scene) {
    if (text::trim(sentence).empty()) throw std::invalid_argument("intent text must not be empty");
    TextIntent r;
    r.candidate.rank = 1;
    r.candidate.text = std::string(text::trim(sentence));
    r.candidate.score = 100;
    r.candidate.highlighted = true;
    r.candidate.targets = match_object_names(sentence, scene);
    if (r.candidate.targets.empty()) {
        r.warning = UnknownTarget("no scene object is named in '" + r.candidate.text + "'").what();
        r.candidate.flag = *r.warning;
    }
    return r;
}

}  // namespace siagent::intent
