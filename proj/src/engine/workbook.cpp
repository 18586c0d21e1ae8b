#include "gensheet/engine/workbook.hpp"

#include <charconv>
#include <cmath>

#include "gensheet/formula/formula.hpp"

namespace gensheet::engine {

std::string local_a1(int32_t col, int32_t row) {
    return formula::column_name(col) + std::to_string(static_cast<int64_t>(row) + 1);
}

std::string to_string(const CellAddress& addr) {
    return formula::quote_sheet_name(addr.sheet) + "!" + local_a1(addr.col, addr.row);
}

CellAddress parse_address(std::string_view text, std::string_view default_sheet) {
    auto ref = formula::parse_cell_ref(text);
    if (!ref) {
        // Sheet names that are not identifiers may be given unquoted.
        if (auto bang = text.rfind('!'); bang != std::string_view::npos) {
            auto local = formula::parse_cell_ref(text.substr(bang + 1));
            if (local && !local->sheet) {
                return CellAddress{std::string(text.substr(0, bang)), local->col, local->row};
            }
        }
        throw EngineError("invalid cell address: " + std::string(text));
    }
    return CellAddress{ref->sheet.value_or(std::string(default_sheet)), ref->col, ref->row};
}

CellRange parse_range(std::string_view text, std::string_view default_sheet) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) {
        auto a = parse_address(text, default_sheet);
        return CellRange{a.sheet, a.col, a.row, a.col, a.row};
    }
    auto a = parse_address(text.substr(0, colon), default_sheet);
    auto b = parse_address(text.substr(colon + 1), a.sheet);
    if (a.sheet != b.sheet) throw EngineError("range spans sheets: " + std::string(text));
    return CellRange{a.sheet, std::min(a.col, b.col), std::min(a.row, b.row), std::max(a.col, b.col),
                     std::max(a.row, b.row)};
}

std::string to_string(const CellRange& range) {
    return formula::quote_sheet_name(range.sheet) + "!" + local_a1(range.col0, range.row0) + ":" +
           local_a1(range.col1, range.row1);
}

CellContent CellContent::parse(std::string_view source) {
    CellContent c;
    if (source.empty()) return c;
    if (source[0] == '=') {
        c.ast_ = formula::parse_formula(source);
        c.kind_ = Kind::Formula;
        c.source_ = std::string(source);
        return c;
    }
    c.kind_ = Kind::Literal;
    c.source_ = std::string(source);
    double d = 0;
    auto [ptr, ec] = std::from_chars(source.data(), source.data() + source.size(), d);
    if (ec == std::errc() && ptr == source.data() + source.size() && std::isfinite(d)) {
        c.literal_ = Value::number(d);
    } else {
        c.literal_ = Value::text(std::string(source));
    }
    return c;
}

CellContent CellContent::from_formula(formula::ExprPtr ast) {
    CellContent c;
    c.kind_ = Kind::Formula;
    c.source_ = formula::serialize(*ast);
    c.ast_ = std::move(ast);
    return c;
}

CellContent CellContent::literal(Value v) {
    if (v.is_number()) return parse(formula::format_number(v.as_number()));
    if (v.is_text()) {
        CellContent c;
        if (v.as_text().empty()) return c;
        c.kind_ = Kind::Literal;
        c.source_ = v.as_text();
        c.literal_ = std::move(v);
        return c;
    }
    throw EngineError("only text and numbers can be stored as literals");
}

const CellContent* Workbook::find(const CellAddress& addr) const {
    auto s = sheets.find(addr.sheet);
    if (s == sheets.end()) return nullptr;
    auto c = s->second.cells.find(addr.pos());
    return c == s->second.cells.end() ? nullptr : &c->second;
}

}  // namespace gensheet::engine
