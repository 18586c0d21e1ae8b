#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "gensheet/formula/cell_ref.hpp"

namespace gensheet::formula {

enum class BinaryOp : char {
    Concat = '&',
    Add = '+',
    Sub = '-',
    Mul = '*',
    Div = '/',
};

/// Binding strength; higher binds tighter.
int precedence(BinaryOp op);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct TextLit {
    std::string text;
};
struct NumLit {
    double value = 0.0;
};
struct RefNode {
    CellRef ref;
};
/// Normalized so that start <= end component-wise.
struct RangeNode {
    CellRef start;
    CellRef end;
};
struct BinaryNode {
    BinaryOp op;
    ExprPtr left;
    ExprPtr right;
};
/// `name` is canonical uppercase.
struct CallNode {
    std::string name;
    std::vector<ExprPtr> args;
};
/// A reference that was shifted off the grid; evaluates to #REF!.
struct RefErrorNode {};

struct Expr {
    std::variant<TextLit, NumLit, RefNode, RangeNode, BinaryNode, CallNode, RefErrorNode> node;

    template <class T>
    const T* as() const {
        return std::get_if<T>(&node);
    }
};

/// Structural equality.
bool operator==(const Expr& a, const Expr& b);
bool same_ast(const ExprPtr& a, const ExprPtr& b);

ExprPtr make_text(std::string text);
ExprPtr make_number(double value);
ExprPtr make_ref(CellRef ref);
ExprPtr make_range(CellRef a, CellRef b);
ExprPtr make_binary(BinaryOp op, ExprPtr left, ExprPtr right);
ExprPtr make_call(std::string name, std::vector<ExprPtr> args);
ExprPtr make_ref_error();

/// Every reference in the expression as an inclusive rectangle; single
/// refs appear as a degenerate rectangle.
struct RefRect {
    CellRef start;
    CellRef end;
};
std::vector<RefRect> collect_refs(const Expr& expr);

}  // namespace gensheet::formula
