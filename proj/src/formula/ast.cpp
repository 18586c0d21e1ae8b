#include "gensheet/formula/ast.hpp"

#include <algorithm>
#include <cctype>
#include <utility>

namespace gensheet::formula {

int precedence(BinaryOp op) {
    switch (op) {
        case BinaryOp::Concat: return 1;
        case BinaryOp::Add:
        case BinaryOp::Sub: return 2;
        case BinaryOp::Mul:
        case BinaryOp::Div: return 3;
    }
    return 0;
}

namespace {

struct EqualVisitor {
    const Expr& other;

    bool operator()(const TextLit& a) const {
        auto b = other.as<TextLit>();
        return b && a.text == b->text;
    }
    bool operator()(const NumLit& a) const {
        auto b = other.as<NumLit>();
        return b && a.value == b->value;
    }
    bool operator()(const RefNode& a) const {
        auto b = other.as<RefNode>();
        return b && a.ref == b->ref;
    }
    bool operator()(const RangeNode& a) const {
        auto b = other.as<RangeNode>();
        return b && a.start == b->start && a.end == b->end;
    }
    bool operator()(const BinaryNode& a) const {
        auto b = other.as<BinaryNode>();
        return b && a.op == b->op && same_ast(a.left, b->left) && same_ast(a.right, b->right);
    }
    bool operator()(const CallNode& a) const {
        auto b = other.as<CallNode>();
        if (!b || a.name != b->name || a.args.size() != b->args.size()) return false;
        for (std::size_t i = 0; i < a.args.size(); ++i) {
            if (!same_ast(a.args[i], b->args[i])) return false;
        }
        return true;
    }
    bool operator()(const RefErrorNode&) const { return other.as<RefErrorNode>() != nullptr; }
};

void collect(const Expr& e, std::vector<RefRect>& out) {
    if (auto r = e.as<RefNode>()) {
        out.push_back({r->ref, r->ref});
    } else if (auto rg = e.as<RangeNode>()) {
        out.push_back({rg->start, rg->end});
    } else if (auto b = e.as<BinaryNode>()) {
        collect(*b->left, out);
        collect(*b->right, out);
    } else if (auto c = e.as<CallNode>()) {
        for (const auto& a : c->args) collect(*a, out);
    }
}

}  // namespace

bool operator==(const Expr& a, const Expr& b) { return std::visit(EqualVisitor{b}, a.node); }

bool same_ast(const ExprPtr& a, const ExprPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    return *a == *b;
}

ExprPtr make_text(std::string text) { return std::make_shared<Expr>(Expr{TextLit{std::move(text)}}); }
ExprPtr make_number(double value) { return std::make_shared<Expr>(Expr{NumLit{value}}); }
ExprPtr make_ref(CellRef ref) { return std::make_shared<Expr>(Expr{RefNode{std::move(ref)}}); }

ExprPtr make_range(CellRef a, CellRef b) {
    if (b.col < a.col) {
        std::swap(a.col, b.col);
        std::swap(a.col_absolute, b.col_absolute);
    }
    if (b.row < a.row) {
        std::swap(a.row, b.row);
        std::swap(a.row_absolute, b.row_absolute);
    }
    if (!b.sheet) b.sheet = a.sheet;
    if (!a.sheet) a.sheet = b.sheet;
    return std::make_shared<Expr>(Expr{RangeNode{std::move(a), std::move(b)}});
}

ExprPtr make_binary(BinaryOp op, ExprPtr left, ExprPtr right) {
    return std::make_shared<Expr>(Expr{BinaryNode{op, std::move(left), std::move(right)}});
}

ExprPtr make_call(std::string name, std::vector<ExprPtr> args) {
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return std::make_shared<Expr>(Expr{CallNode{std::move(name), std::move(args)}});
}

ExprPtr make_ref_error() { return std::make_shared<Expr>(Expr{RefErrorNode{}}); }

std::vector<RefRect> collect_refs(const Expr& expr) {
    std::vector<RefRect> out;
    collect(expr, out);
    return out;
}

}  // namespace gensheet::formula
