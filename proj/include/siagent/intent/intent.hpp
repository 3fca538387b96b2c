#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "siagent/core/clock.hpp"
#include "siagent/llm/backend.hpp"
#include "siagent/scene/scene.hpp"
#include "siagent/translator/translator.hpp"

namespace siagent::intent {

enum class Channel { Gaze, Hand, Finger };

std::string_view to_string(Channel c);
/// "gaze", "gaze,hand", "full" / "all". Throws ConfigError.
std::set<Channel> parse_channels(std::string_view spec);
inline const std::set<Channel> kAllChannels{Channel::Gaze, Channel::Hand, Channel::Finger};

struct IntentCandidate {
    int rank = 1;
    std::string text;
    /// Scene names, canonical case.
    std::vector<std::string> targets;
    int score = 0;
    bool highlighted = false;
    /// False when a target is outside the gaze set or the score was not a
    /// number; such candidates sort below every valid one.
    bool valid = true;
    std::string flag;

    bool operator==(const IntentCandidate&) const = default;
};

inline constexpr int kMaxCandidates = 6;
inline constexpr int kPresentedInitially = 3;
inline constexpr int kHighlightScore = 90;

struct IntentQuery {
    translator::LinguisticBundle bundle;
    /// Gaze-involved objects and their states, in gaze order.
    std::vector<std::pair<std::string, std::string>> object_states;
    std::string prompt_id = "intent";
    std::set<Channel> channels = kAllChannels;
};

/// Query over the gaze targets of a translation. Throws ConfigError if
/// `channels` lacks Gaze.
IntentQuery make_query(const translator::Translation& t, const scene::SceneSnapshot& scene,
                       std::set<Channel> channels = kAllChannels);

/// Slot values for the intent prompt: only the included channels appear.
llm::SlotMap intent_slots(const IntentQuery& q);
std::string build_intent_prompt(const IntentQuery& q);

/// Parses "<rank>. <text> | targets: <a,b> | score: <n>" lines. Scores are
/// clamped to [0,100]; invalid candidates are demoted below valid ones with
/// their score capped at the lowest valid score. Returns at most six, ranks
/// renumbered. Throws ParseFailure when no line parses.
std::vector<IntentCandidate> parse_intents(std::string_view raw, const std::vector<std::string>& valid_targets);

struct Recognition {
    std::vector<IntentCandidate> candidates;
    std::vector<llm::CallRecord> calls;
    double latency_ms = 0.0;
};

/// Prompt, call, parse; one re-prompt on ParseFailure.
Recognition recognize(const IntentQuery& q, llm::Backend& backend);

// ---- confirmation ----

enum class ChoiceKind { Pick, More, None };

struct Choice {
    ChoiceKind kind = ChoiceKind::Pick;
    int rank = 0;
};

/// "1".."6", "more", "none". Throws InputError.
Choice parse_choice(std::string_view s);

struct ConfirmationResult {
    std::optional<IntentCandidate> chosen;
    bool expanded = false;
    double confirm_time_ms = 0.0;
};

/// Interactive selection over ranked candidates: the top three first, all
/// six after "more".
class Confirmation {
public:
    /// Throws std::invalid_argument on an empty list.
    explicit Confirmation(std::vector<IntentCandidate> candidates);

    std::vector<IntentCandidate> presented() const;
    bool expanded() const { return expanded_; }
    const std::vector<IntentCandidate>& candidates() const { return candidates_; }

    /// Applies one choice. Returns the outcome for Pick / None, nullopt for
    /// More. Picking a rank that is not presented throws InputError and
    /// leaves the state unchanged.
    std::optional<ConfirmationResult> apply(const Choice& c);

private:
    std::vector<IntentCandidate> candidates_;
    bool expanded_ = false;
};

using SelectionSource = std::function<std::optional<Choice>()>;

/// Drives a Confirmation from a choice stream, re-asking after bad input.
/// Throws InputError if the stream ends before a decision.
ConfirmationResult confirm(std::vector<IntentCandidate> candidates, const SelectionSource& source,
                           const Clock& clock);

// ---- text bypass ----

struct TextIntent {
    IntentCandidate candidate;
    /// Set when no scene object was recognized (UnknownTarget warning).
    std::optional<std::string> warning;
};

/// Object names mentioned in free text, in order of first mention. A name
/// contained in a longer matched name at the same place (TV inside TV
/// cabinet) does not count there. Falls back to head-noun matches.
std::vector<std::string> match_object_names(std::string_view text, const scene::SceneSnapshot& scene);

/// Throws std::invalid_argument on empty text.
TextIntent intent_from_text(std::string_view text, const scene::SceneSnapshot& scene);

}  // namespace siagent::intent
