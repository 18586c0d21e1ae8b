#pragma once

#include <string>
#include <variant>

#include "gensheet/engine/workbook.hpp"
#include "gensheet/formula/ast.hpp"
#include "gensheet/genfns/functions.hpp"
#include "gensheet/value.hpp"

namespace gensheet::engine {

/// What the evaluator needs from its host: cell values, sheet existence and
/// a place to send generative calls.
class EvalContext {
public:
    virtual ~EvalContext() = default;
    virtual Value lookup(const CellAddress& addr) = 0;
    virtual bool sheet_exists(const std::string& name) = 0;
    virtual const gen::GenDefaults& defaults() = 0;
    /// Returns the completed result (an item list for list functions) or a
    /// Pending/Error value.
    virtual std::variant<Value, gen::ItemList> generate(const gen::GenRequest& request) = 0;
};

/// Larger ranges evaluate to #VALUE!.
inline constexpr long long kMaxRangeCells = 1'000'000;

Value evaluate(const formula::Expr& expr, const std::string& sheet, EvalContext& ctx);

/// Top-level evaluation of a cell's formula. List functions are only legal
/// here and may return the whole item list.
std::variant<Value, gen::ItemList> evaluate_top(const formula::Expr& expr, const std::string& sheet,
                                                EvalContext& ctx);

/// Number coercion for arithmetic: Blank is 0, numeric text converts.
std::variant<double, Value> to_number(const Value& v);

}  // namespace gensheet::engine
