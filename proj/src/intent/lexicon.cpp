#include "siagent/intent/lexicon.hpp"

#include <fstream>
#include <sstream>

#include "siagent/core/error.hpp"
#include "siagent/core/paths.hpp"
#include "siagent/core/text.hpp"

namespace siagent::intent {

namespace {

// Returns the number of tokens spanned when `phrase` matches at `at`.
std::optional<std::size_t> match_at(const std::vector<std::string>& toks, std::size_t at,
                                    const std::vector<std::string>& phrase) {
    std::size_t i = at;
    for (std::size_t p = 0; p < phrase.size(); ++p) {
        if (phrase[p] == "*") {
            if (p + 1 == phrase.size()) return i - at;
            const auto& next = phrase[p + 1];
            std::size_t j = i + 1;  // the gap covers at least one word
            while (j < toks.size() && toks[j] != next) ++j;
            if (j >= toks.size()) return std::nullopt;
            i = j;
            continue;
        }
        if (i >= toks.size() || toks[i] != phrase[p]) return std::nullopt;
        ++i;
    }
    return i - at;
}

}  // namespace

VerbLexicon VerbLexicon::parse(std::string_view text) {
    VerbLexicon lex;
    std::size_t line_no = 0;
    for (const auto& raw : text::split(text, '\n')) {
        ++line_no;
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto colon = line.find(':');
        if (colon == std::string_view::npos) throw ParseError(line_no, "expected 'canonical: phrase, ...'");
        Entry e{std::string(text::trim(line.substr(0, colon))), {}};
        for (const auto& p : text::split(line.substr(colon + 1), ',')) {
            auto phrase = text::to_lower(text::trim(p));
            if (!phrase.empty()) e.phrases.push_back(phrase);
        }
        if (e.canonical.empty() || e.phrases.empty()) throw ParseError(line_no, "empty verb entry");
        lex.entries_.push_back(std::move(e));
    }
    return lex;
}

VerbLexicon VerbLexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read verb table " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

const VerbLexicon& VerbLexicon::defaults() {
    static const VerbLexicon lex = load(data_dir() / "verbs.txt");
    return lex;
}

std::optional<VerbMatch> VerbLexicon::find(std::string_view sentence) const {
    auto toks = text::word_tokens(sentence);
    for (std::size_t at = 0; at < toks.size(); ++at) {
        std::optional<VerbMatch> best;
        std::size_t best_len = 0;
        for (const auto& e : entries_) {
            for (const auto& p : e.phrases) {
                // phrases go through the same plural stripping as the sentence
                auto words = text::word_tokens(p);
                if (p.find('*') != std::string::npos) {
                    words.clear();
                    for (const auto& w : text::split_ws(p)) {
                        if (w == "*")
                            words.push_back(w);
                        else
                            for (auto& t : text::word_tokens(w)) words.push_back(t);
                    }
                }
                auto len = match_at(toks, at, words);
                if (!len) continue;
                // contiguous phrases beat gapped ones: "turn off the lamp on the desk"
                std::size_t rank = *len + (p.find('*') == std::string::npos ? 1000 : 0);
                if (rank > best_len) {
                    best_len = rank;
                    best = VerbMatch{e.canonical, at};
                }
            }
        }
        if (best) return best;
    }
    return std::nullopt;
}

std::optional<std::string> VerbLexicon::canonical(std::string_view sentence) const {
    auto m = find(sentence);
    if (!m) return std::nullopt;
    return m->canonical;
}

std::vector<std::string> VerbLexicon::canonicals() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.canonical);
    return out;
}

const std::vector<std::string>& VerbLexicon::phrases_of(std::string_view canonical) const {
    for (const auto& e : entries_)
        if (e.canonical == canonical) return e.phrases;
    throw ConfigError("unknown verb '" + std::string(canonical) + "'");
}

}  // namespace siagent::intent
