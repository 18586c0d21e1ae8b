#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "gensheet/formula/ast.hpp"
#include "gensheet/genfns/generation.hpp"
#include "gensheet/value.hpp"

namespace gensheet::engine {

class EngineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidRange : public EngineError {
public:
    using EngineError::EngineError;
};

/// Row-major position within one sheet.
struct CellPos {
    int32_t row = 0;
    int32_t col = 0;

    auto operator<=>(const CellPos&) const = default;
};

struct CellAddress {
    std::string sheet;
    int32_t col = 0;
    int32_t row = 0;

    CellPos pos() const { return {row, col}; }
    bool operator==(const CellAddress&) const = default;
    std::strong_ordering operator<=>(const CellAddress& o) const {
        if (auto c = sheet <=> o.sheet; c != 0) return c;
        if (auto c = row <=> o.row; c != 0) return c;
        return col <=> o.col;
    }
};

std::string to_string(const CellAddress& addr);
std::string local_a1(int32_t col, int32_t row);

/// `Sheet1!B3` or `B3` (resolved against default_sheet).
CellAddress parse_address(std::string_view text, std::string_view default_sheet);

/// Inclusive rectangle on one sheet.
struct CellRange {
    std::string sheet;
    int32_t col0 = 0;
    int32_t row0 = 0;
    int32_t col1 = 0;
    int32_t row1 = 0;

    int32_t width() const { return col1 - col0 + 1; }
    int32_t height() const { return row1 - row0 + 1; }
    bool contains(const CellAddress& a) const {
        return a.sheet == sheet && a.col >= col0 && a.col <= col1 && a.row >= row0 && a.row <= row1;
    }
    bool operator==(const CellRange&) const = default;
};

/// `A1:B3`, `Sheet!A1:B3` or a single cell.
CellRange parse_range(std::string_view text, std::string_view default_sheet);
std::string to_string(const CellRange& range);

/// What a user typed into a cell. Formula sources start with `=`; other
/// text is a number when it parses completely as one.
class CellContent {
public:
    enum class Kind { Empty, Literal, Formula };

    CellContent() = default;

    /// Throws formula::FormulaError for malformed formulas.
    static CellContent parse(std::string_view source);
    static CellContent from_formula(formula::ExprPtr ast);
    static CellContent literal(Value v);

    Kind kind() const { return kind_; }
    bool is_empty() const { return kind_ == Kind::Empty; }
    bool is_formula() const { return kind_ == Kind::Formula; }
    const std::string& source() const { return source_; }
    const Value& literal_value() const { return literal_; }
    const formula::ExprPtr& ast() const { return ast_; }

    bool operator==(const CellContent& o) const {
        return kind_ == o.kind_ && source_ == o.source_ && literal_ == o.literal_;
    }

private:
    Kind kind_ = Kind::Empty;
    std::string source_;
    Value literal_;
    formula::ExprPtr ast_;
};

struct Sheet {
    std::map<CellPos, CellContent> cells;  // non-empty cells only
};

struct WorkbookSettings {
    uint32_t default_seed = gen::kDefaultSeed;
    double default_cfg = gen::kDefaultCfg;
    std::string provider_profile = "default";

    bool operator==(const WorkbookSettings&) const = default;
};

struct Workbook {
    std::map<std::string, Sheet> sheets;
    WorkbookSettings settings;

    const CellContent* find(const CellAddress& addr) const;
};

}  // namespace gensheet::engine
