#include "gensheet/genfns/array_literal.hpp"

#include <cctype>

namespace gensheet::gen {

namespace {

class ArrayScanner {
public:
    explicit ArrayScanner(std::string_view s) : s_(s) {}

    std::optional<std::vector<std::string>> run() {
        std::vector<std::string> items;
        skip_ws();
        if (!eat('[')) return std::nullopt;
        skip_ws();
        if (eat(']')) return finish(std::move(items));
        while (true) {
            auto item = string_literal();
            if (!item) return std::nullopt;
            items.push_back(std::move(*item));
            skip_ws();
            if (eat(']')) return finish(std::move(items));
            if (!eat(',')) return std::nullopt;
            skip_ws();
        }
    }

private:
    std::optional<std::vector<std::string>> finish(std::vector<std::string> items) {
        skip_ws();
        if (pos_ != s_.size()) return std::nullopt;
        return items;
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::optional<std::string> string_literal() {
        if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\'')) return std::nullopt;
        const char quote = s_[pos_++];
        std::string out;
        while (pos_ < s_.size()) {
            const char c = s_[pos_++];
            if (c == quote) return out;
            if (c == '\n') return std::nullopt;
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            if (pos_ >= s_.size()) return std::nullopt;
            const char e = s_[pos_++];
            switch (e) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case '\\':
                case '"':
                case '\'':
                case '/': out.push_back(e); break;
                default: return std::nullopt;
            }
        }
        return std::nullopt;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

}  // namespace

std::optional<std::vector<std::string>> parse_array_literal(std::string_view text) {
    return ArrayScanner(text).run();
}

std::string format_array_literal(const std::vector<std::string>& items) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += '"';
        for (char c : items[i]) {
            if (c == '"' || c == '\\') out.push_back('\\');
            out.push_back(c);
        }
        out += '"';
    }
    out += "]";
    return out;
}

}  // namespace gensheet::gen
