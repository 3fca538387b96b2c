#include "siagent/llm/prompt.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "siagent/core/error.hpp"
#include "siagent/core/paths.hpp"

namespace siagent::llm {

namespace {

template <typename F>
void scan_slots(const std::string& text, F&& on_slot) {
    std::size_t pos = 0;
    while ((pos = text.find("{{", pos)) != std::string::npos) {
        auto end = text.find("}}", pos + 2);
        if (end == std::string::npos) break;
        on_slot(pos, end + 2, text.substr(pos + 2, end - pos - 2));
        pos = end + 2;
    }
}

}  // namespace

PromptTemplate::PromptTemplate(std::string name, std::string text)
    : name_(std::move(name)), text_(std::move(text)) {
    scan_slots(text_, [&](std::size_t, std::size_t, std::string slot) {
        if (std::find(slots_.begin(), slots_.end(), slot) == slots_.end()) slots_.push_back(std::move(slot));
    });
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read prompt template " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return PromptTemplate(path.stem().string(), ss.str());
}

std::string PromptTemplate::render(const SlotMap& values) const {
    for (const auto& slot : slots_)
        if (!values.contains(slot))
            throw ConfigError("prompt '" + name_ + "': slot {{" + slot + "}} is unfilled");
    std::string out;
    std::size_t last = 0;
    scan_slots(text_, [&](std::size_t begin, std::size_t end, const std::string& slot) {
        out.append(text_, last, begin - last);
        out += values.at(slot);
        last = end;
    });
    out.append(text_, last, std::string::npos);
    return out;
}

PromptTemplate load_prompt(std::string_view name) {
    return PromptTemplate::load(data_dir() / "prompts" / (std::string(name) + ".txt"));
}

}  // namespace siagent::llm
