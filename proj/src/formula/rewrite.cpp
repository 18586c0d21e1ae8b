#include <optional>

#include "gensheet/formula/formula.hpp"

namespace gensheet::formula {

namespace {

std::optional<CellRef> shift(CellRef ref, int32_t dc, int32_t dr) {
    const int64_t col = ref.col_absolute ? ref.col : int64_t{ref.col} + dc;
    const int64_t row = ref.row_absolute ? ref.row : int64_t{ref.row} + dr;
    if (col < 0 || col > kMaxCol || row < 0 || row > kMaxRow) return std::nullopt;
    ref.col = static_cast<int32_t>(col);
    ref.row = static_cast<int32_t>(row);
    return ref;
}

}  // namespace

ExprPtr rewrite_refs(const ExprPtr& ast, int32_t delta_col, int32_t delta_row) {
    const Expr& e = *ast;
    if (auto r = e.as<RefNode>()) {
        auto moved = shift(r->ref, delta_col, delta_row);
        return moved ? make_ref(*moved) : make_ref_error();
    }
    if (auto rg = e.as<RangeNode>()) {
        auto a = shift(rg->start, delta_col, delta_row);
        auto b = shift(rg->end, delta_col, delta_row);
        if (!a || !b) return make_ref_error();
        return make_range(*a, *b);
    }
    if (auto b = e.as<BinaryNode>()) {
        return make_binary(b->op, rewrite_refs(b->left, delta_col, delta_row),
                           rewrite_refs(b->right, delta_col, delta_row));
    }
    if (auto c = e.as<CallNode>()) {
        std::vector<ExprPtr> args;
        args.reserve(c->args.size());
        for (const auto& a : c->args) args.push_back(rewrite_refs(a, delta_col, delta_row));
        return make_call(c->name, std::move(args));
    }
    return ast;
}

ExprPtr rename_sheet(const ExprPtr& ast, const std::string& from, const std::string& to) {
    auto fix = [&](CellRef r) {
        if (r.sheet && *r.sheet == from) r.sheet = to;
        return r;
    };
    const Expr& e = *ast;
    if (auto r = e.as<RefNode>()) return make_ref(fix(r->ref));
    if (auto rg = e.as<RangeNode>()) return make_range(fix(rg->start), fix(rg->end));
    if (auto b = e.as<BinaryNode>()) {
        return make_binary(b->op, rename_sheet(b->left, from, to), rename_sheet(b->right, from, to));
    }
    if (auto c = e.as<CallNode>()) {
        std::vector<ExprPtr> args;
        for (const auto& a : c->args) args.push_back(rename_sheet(a, from, to));
        return make_call(c->name, std::move(args));
    }
    return ast;
}

}  // namespace gensheet::formula
