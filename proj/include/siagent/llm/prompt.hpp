#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "siagent/llm/backend.hpp"

namespace siagent::llm {

/// Text template with {{slot}} placeholders. Rendering refuses to emit a
/// prompt with any slot left unfilled.
class PromptTemplate {
public:
    PromptTemplate() = default;
    PromptTemplate(std::string name, std::string text);

    static PromptTemplate load(const std::filesystem::path& path);

    const std::string& name() const { return name_; }
    const std::string& text() const { return text_; }
    /// Declared slots in order of first appearance.
    const std::vector<std::string>& slots() const { return slots_; }

    /// Throws ConfigError naming the first unfilled slot.
    std::string render(const SlotMap& values) const;

private:
    std::string name_;
    std::string text_;
    std::vector<std::string> slots_;
};

/// Loads data/prompts/<name>.txt.
PromptTemplate load_prompt(std::string_view name);

}  // namespace siagent::llm
