#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace siagent::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
bool iequals(std::string_view a, std::string_view b);
bool starts_with(std::string_view s, std::string_view prefix);

/// Fixed 6-decimal rendering used by every on-disk float. Negative zero is
/// printed as 0.000000 so files stay byte-stable.
std::string fixed6(double v);

/// "DeskLamp" -> {"desk", "lamp"}; "TV_Cabinet" -> {"tv", "cabinet"}.
std::vector<std::string> name_tokens(std::string_view name);

/// Lowercased alphanumeric word tokens with a naive plural strip
/// ("apples" -> "apple").
std::vector<std::string> word_tokens(std::string_view sentence);

/// True if `phrase` (space separated words) occurs in `tokens` as a
/// contiguous run.
bool contains_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase);

/// 64-bit FNV-1a, used for stable fingerprints.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 14695981039346656037ull);
std::string hex64(std::uint64_t v);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace siagent::text
