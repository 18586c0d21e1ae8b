#include "gensheet/formula/cell_ref.hpp"

#include <cctype>

namespace gensheet::formula {

std::string column_name(int32_t col) {
    std::string out;
    int64_t n = static_cast<int64_t>(col) + 1;
    while (n > 0) {
        const int64_t rem = (n - 1) % 26;
        out.insert(out.begin(), static_cast<char>('A' + rem));
        n = (n - 1) / 26;
    }
    return out;
}

std::optional<int32_t> parse_column(std::string_view letters) {
    if (letters.empty() || letters.size() > 3) return std::nullopt;
    int64_t n = 0;
    for (char c : letters) {
        if (!std::isalpha(static_cast<unsigned char>(c))) return std::nullopt;
        n = n * 26 + (std::toupper(static_cast<unsigned char>(c)) - 'A' + 1);
    }
    if (n - 1 > kMaxCol) return std::nullopt;
    return static_cast<int32_t>(n - 1);
}

namespace {

bool is_identifier(std::string_view s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    for (char c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    }
    return true;
}

std::optional<CellRef> parse_local_ref(std::string_view text) {
    CellRef ref;
    std::size_t i = 0;
    if (i < text.size() && text[i] == '$') {
        ref.col_absolute = true;
        ++i;
    }
    const std::size_t letters_begin = i;
    while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
    auto col = parse_column(text.substr(letters_begin, i - letters_begin));
    if (!col) return std::nullopt;
    ref.col = *col;
    if (i < text.size() && text[i] == '$') {
        ref.row_absolute = true;
        ++i;
    }
    const std::size_t digits_begin = i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    if (i != text.size() || i == digits_begin || i - digits_begin > 7) return std::nullopt;
    if (text[digits_begin] == '0') return std::nullopt;
    int64_t row = 0;
    for (std::size_t k = digits_begin; k < i; ++k) row = row * 10 + (text[k] - '0');
    if (row - 1 > kMaxRow) return std::nullopt;
    ref.row = static_cast<int32_t>(row - 1);
    return ref;
}

}  // namespace

std::optional<CellRef> parse_cell_ref(std::string_view text) {
    std::optional<std::string> sheet;
    if (!text.empty() && text[0] == '\'') {
        std::string name;
        std::size_t i = 1;
        bool closed = false;
        while (i < text.size()) {
            if (text[i] == '\'') {
                if (i + 1 < text.size() && text[i + 1] == '\'') {
                    name.push_back('\'');
                    i += 2;
                    continue;
                }
                closed = true;
                ++i;
                break;
            }
            name.push_back(text[i++]);
        }
        if (!closed || name.empty() || i >= text.size() || text[i] != '!') return std::nullopt;
        sheet = std::move(name);
        text.remove_prefix(i + 1);
    } else if (auto bang = text.find('!'); bang != std::string_view::npos) {
        auto name = text.substr(0, bang);
        if (!is_identifier(name)) return std::nullopt;
        sheet = std::string(name);
        text.remove_prefix(bang + 1);
    }
    auto ref = parse_local_ref(text);
    if (!ref) return std::nullopt;
    ref->sheet = std::move(sheet);
    return ref;
}

std::string quote_sheet_name(std::string_view sheet) {
    if (is_identifier(sheet) && !parse_local_ref(sheet)) return std::string(sheet);
    std::string out = "'";
    for (char c : sheet) {
        if (c == '\'') out += "''";
        else out.push_back(c);
    }
    out += "'";
    return out;
}

std::string to_a1(const CellRef& ref) {
    std::string out;
    if (ref.sheet) {
        out += quote_sheet_name(*ref.sheet);
        out += '!';
    }
    if (ref.col_absolute) out += '$';
    out += column_name(ref.col);
    if (ref.row_absolute) out += '$';
    out += std::to_string(static_cast<int64_t>(ref.row) + 1);
    return out;
}

}  // namespace gensheet::formula
