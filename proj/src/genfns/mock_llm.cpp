#include <cctype>
#include <regex>

#include "gensheet/genfns/array_literal.hpp"
#include "gensheet/genfns/mock.hpp"

namespace gensheet::gen {

std::string slugify(std::string_view text) {
    std::string out;
    bool gap = false;
    for (unsigned char c : text) {
        if (std::isalnum(c) && c < 0x80) {
            if (gap && !out.empty()) out.push_back('-');
            gap = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            gap = true;
        }
    }
    return out.empty() ? "item" : out;
}

std::string mock_llm(const LlmRequest& request) {
    std::string last;
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
        if (it->role == "user") {
            last = it->content;
            break;
        }
    }
    if (request.expects_list) {
        static const std::regex framed(R"(^([\s\S]*) \(length: (\d+)\)$)");
        std::smatch m;
        std::string prompt = last;
        int n = request.expected_length.value_or(5);
        if (std::regex_match(last, m, framed) && m[2].length() <= 4) {
            prompt = m[1].str();
            n = std::stoi(m[2].str());
        }
        const auto slug = slugify(prompt);
        std::vector<std::string> items;
        for (int i = 1; i <= n; ++i) items.push_back(slug + "-" + std::to_string(i));
        return format_array_literal(items);
    }
    static constexpr std::string_view kEmbellish = "Embellish this sentence: ";
    if (last.starts_with(kEmbellish)) return "EMBELLISH(" + last.substr(kEmbellish.size()) + ")";
    return "GPT(" + last + ")";
}

}  // namespace gensheet::gen
