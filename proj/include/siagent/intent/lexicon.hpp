#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace siagent::intent {

struct VerbMatch {
    std::string canonical;
    std::size_t position = 0;  // token index of the match start
};

/// Verb synonym table. Lines "canonical: phrase, phrase, ...". A '*' inside
/// a phrase matches any run of words ("turn * on").
class VerbLexicon {
public:
    static VerbLexicon parse(std::string_view text);
    static VerbLexicon load(const std::filesystem::path& path);
    /// data/verbs.txt, loaded once.
    static const VerbLexicon& defaults();

    /// Earliest verb phrase in the sentence; longer phrases win at the same
    /// position.
    std::optional<VerbMatch> find(std::string_view sentence) const;
    std::optional<std::string> canonical(std::string_view sentence) const;

    std::vector<std::string> canonicals() const;
    const std::vector<std::string>& phrases_of(std::string_view canonical) const;

private:
    struct Entry {
        std::string canonical;
        std::vector<std::string> phrases;
    };
    std::vector<Entry> entries_;
};

}  // namespace siagent::intent
