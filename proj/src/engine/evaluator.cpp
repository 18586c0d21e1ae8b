#include "gensheet/engine/evaluator.hpp"

#include <charconv>
#include <cmath>
#include <optional>

#include "gensheet/formula/formula.hpp"

namespace gensheet::engine {

namespace {

using formula::BinaryNode;
using formula::BinaryOp;
using formula::CallNode;
using formula::Expr;
using formula::NumLit;
using formula::RangeNode;
using formula::RefErrorNode;
using formula::RefNode;
using formula::TextLit;

/// First error wins over pending; pending over anything else.
std::optional<Value> blocking(const Value& v) {
    if (v.is_error() || v.is_pending()) return v;
    return std::nullopt;
}

Value merge_blocking(std::optional<Value> a, std::optional<Value> b) {
    if (a && a->is_error()) return *a;
    if (b && b->is_error()) return *b;
    return a ? *a : *b;
}

std::string resolve_sheet(const formula::CellRef& ref, const std::string& sheet) {
    return ref.sheet.value_or(sheet);
}

Value read_ref(const formula::CellRef& ref, const std::string& sheet, EvalContext& ctx) {
    auto name = resolve_sheet(ref, sheet);
    if (!ctx.sheet_exists(name)) return Value::error(ErrorKind::Ref, "no sheet named " + name);
    Value v = ctx.lookup(CellAddress{name, ref.col, ref.row});
    if (v.is_error() && v.as_error().kind == ErrorKind::Cycle) {
        return Value::error(ErrorKind::Value, "depends on a cell in a cycle");
    }
    return v;
}

std::variant<std::vector<Value>, Value> read_range(const RangeNode& rg, const std::string& sheet,
                                                   EvalContext& ctx) {
    auto name = resolve_sheet(rg.start, sheet);
    if (!ctx.sheet_exists(name)) return Value::error(ErrorKind::Ref, "no sheet named " + name);
    const long long cells = static_cast<long long>(rg.end.col - rg.start.col + 1) *
                            static_cast<long long>(rg.end.row - rg.start.row + 1);
    if (cells > kMaxRangeCells) return Value::error(ErrorKind::Value, "range too large");
    std::vector<Value> out;
    out.reserve(static_cast<std::size_t>(cells));
    for (int32_t r = rg.start.row; r <= rg.end.row; ++r) {
        for (int32_t c = rg.start.col; c <= rg.end.col; ++c) {
            formula::CellRef one;
            one.col = c;
            one.row = r;
            one.sheet = name;
            out.push_back(read_ref(one, sheet, ctx));
        }
    }
    return out;
}

Value arithmetic(BinaryOp op, const Value& l, const Value& r) {
    auto a = to_number(l);
    if (auto* e = std::get_if<Value>(&a)) return *e;
    auto b = to_number(r);
    if (auto* e = std::get_if<Value>(&b)) return *e;
    const double x = std::get<double>(a);
    const double y = std::get<double>(b);
    double out = 0;
    switch (op) {
        case BinaryOp::Add: out = x + y; break;
        case BinaryOp::Sub: out = x - y; break;
        case BinaryOp::Mul: out = x * y; break;
        case BinaryOp::Div:
            if (y == 0) return Value::error(ErrorKind::Value, "division by zero");
            out = x / y;
            break;
        case BinaryOp::Concat: break;
    }
    if (!std::isfinite(out)) return Value::error(ErrorKind::Value, "number out of range");
    return Value::number(out);
}

Value eval_binary(const BinaryNode& b, const std::string& sheet, EvalContext& ctx) {
    Value l = evaluate(*b.left, sheet, ctx);
    Value r = evaluate(*b.right, sheet, ctx);
    auto bl = blocking(l);
    auto br = blocking(r);
    if (bl || br) return merge_blocking(bl, br);
    if (b.op == BinaryOp::Concat) {
        auto a = coerce_text(l);
        auto c = coerce_text(r);
        if (!a || !c) return Value::error(ErrorKind::Value, "an image cannot be joined as text");
        return Value::text(*a + *c);
    }
    return arithmetic(b.op, l, r);
}

/// Evaluated arguments, or the value that short-circuits the call.
std::variant<std::vector<gen::Arg>, Value> eval_args(const CallNode& call, const std::string& sheet,
                                                     EvalContext& ctx) {
    std::vector<gen::Arg> args;
    std::optional<Value> first_pending;
    for (const auto& a : call.args) {
        if (const auto* rg = a->as<RangeNode>()) {
            auto cells = read_range(*rg, sheet, ctx);
            if (auto* e = std::get_if<Value>(&cells)) return *e;
            auto& vals = std::get<std::vector<Value>>(cells);
            for (const auto& v : vals) {
                if (v.is_error()) return v;
                if (v.is_pending() && !first_pending) first_pending = v;
            }
            args.emplace_back(std::move(vals));
        } else {
            Value v = evaluate(*a, sheet, ctx);
            if (v.is_error()) return v;
            if (v.is_pending() && !first_pending) first_pending = v;
            args.emplace_back(std::move(v));
        }
    }
    if (first_pending) return *first_pending;
    return args;
}

template <class F>
void for_each_value(const std::vector<gen::Arg>& args, F&& f) {
    for (const auto& a : args) {
        if (const auto* v = std::get_if<Value>(&a)) {
            f(*v, false);
        } else {
            for (const auto& x : std::get<std::vector<Value>>(a)) f(x, true);
        }
    }
}

std::optional<Value> builtin(const CallNode& call, const std::vector<gen::Arg>& args) {
    if (call.name == "IMAGE") {
        if (args.size() != 1 || !std::holds_alternative<Value>(args[0])) {
            return Value::error(ErrorKind::Value, "IMAGE takes one image");
        }
        const auto& v = std::get<Value>(args[0]);
        if (!v.is_image()) return Value::error(ErrorKind::Value, "IMAGE expects an image");
        return v;
    }
    if (call.name == "SUM") {
        double total = 0;
        std::optional<Value> err;
        for_each_value(args, [&](const Value& v, bool in_range) {
            if (err) return;
            if (in_range) {
                if (v.is_number()) total += v.as_number();
                return;
            }
            auto n = to_number(v);
            if (auto* e = std::get_if<Value>(&n)) err = *e;
            else total += std::get<double>(n);
        });
        if (err) return err;
        if (!std::isfinite(total)) return Value::error(ErrorKind::Value, "number out of range");
        return Value::number(total);
    }
    if (call.name == "CONCAT") {
        std::string out;
        bool bad = false;
        for_each_value(args, [&](const Value& v, bool) {
            auto t = coerce_text(v);
            if (!t) bad = true;
            else out += *t;
        });
        if (bad) return Value::error(ErrorKind::Value, "an image cannot be joined as text");
        return Value::text(std::move(out));
    }
    return std::nullopt;
}

std::variant<Value, gen::ItemList> eval_call(const CallNode& call, const std::string& sheet, EvalContext& ctx,
                                             bool top_level) {
    const bool is_builtin = call.name == "IMAGE" || call.name == "SUM" || call.name == "CONCAT";
    const gen::FunctionSpec* spec = is_builtin ? nullptr : gen::find_function(call.name);
    if (!is_builtin && !spec) return Value::error(ErrorKind::Name, "unknown function " + call.name);
    if (spec && gen::is_list_function(*spec) && !top_level) {
        return Value::error(ErrorKind::Value, call.name + " must be the whole formula");
    }
    auto evaluated = eval_args(call, sheet, ctx);
    if (auto* v = std::get_if<Value>(&evaluated)) return *v;
    const auto& args = std::get<std::vector<gen::Arg>>(evaluated);
    if (is_builtin) return *builtin(call, args);
    auto req = gen::build_request(*spec, args, ctx.defaults());
    if (auto* v = std::get_if<Value>(&req)) return *v;
    return ctx.generate(std::get<gen::GenRequest>(req));
}

}  // namespace

std::variant<double, Value> to_number(const Value& v) {
    if (v.is_blank()) return 0.0;
    if (v.is_number()) return v.as_number();
    if (v.is_text()) {
        const auto& s = v.as_text();
        double d = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
        if (!s.empty() && ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(d)) return d;
        return Value::error(ErrorKind::Value, "not a number: " + s);
    }
    if (v.is_error() || v.is_pending()) return v;
    return Value::error(ErrorKind::Value, "an image is not a number");
}

Value evaluate(const Expr& expr, const std::string& sheet, EvalContext& ctx) {
    return std::visit(
        [&](const auto& n) -> Value {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, TextLit>) {
                return Value::text(n.text);
            } else if constexpr (std::is_same_v<T, NumLit>) {
                return Value::number(n.value);
            } else if constexpr (std::is_same_v<T, RefNode>) {
                return read_ref(n.ref, sheet, ctx);
            } else if constexpr (std::is_same_v<T, RangeNode>) {
                return Value::error(ErrorKind::Value, "a range can only be a function argument");
            } else if constexpr (std::is_same_v<T, BinaryNode>) {
                return eval_binary(n, sheet, ctx);
            } else if constexpr (std::is_same_v<T, CallNode>) {
                auto out = eval_call(n, sheet, ctx, false);
                return std::get<Value>(std::move(out));
            } else {
                static_assert(std::is_same_v<T, RefErrorNode>);
                return Value::error(ErrorKind::Ref, "reference moved off the grid");
            }
        },
        expr.node);
}

std::variant<Value, gen::ItemList> evaluate_top(const Expr& expr, const std::string& sheet, EvalContext& ctx) {
    if (const auto* call = expr.as<CallNode>()) return eval_call(*call, sheet, ctx, true);
    return evaluate(expr, sheet, ctx);
}

}  // namespace gensheet::engine
