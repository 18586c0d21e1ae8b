#include <array>
#include <charconv>
#include <cmath>

#include "gensheet/formula/formula.hpp"

namespace gensheet::formula {

std::string format_number(double value) {
    if (value == 0) return std::signbit(value) ? "-0" : "0";
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc()) return "0";
    return std::string(buf.data(), ptr);
}

namespace {

void write(const Expr& e, std::string& out);

void write_operand(const Expr& child, int parent_prec, bool right_side, std::string& out) {
    bool parens = false;
    if (auto b = child.as<BinaryNode>()) {
        const int p = precedence(b->op);
        parens = p < parent_prec || (right_side && p == parent_prec);
    }
    if (parens) out += '(';
    write(child, out);
    if (parens) out += ')';
}

void write(const Expr& e, std::string& out) {
    if (auto t = e.as<TextLit>()) {
        out += quote_string(t->text);
    } else if (auto n = e.as<NumLit>()) {
        out += format_number(n->value);
    } else if (auto r = e.as<RefNode>()) {
        out += to_a1(r->ref);
    } else if (auto rg = e.as<RangeNode>()) {
        out += to_a1(rg->start);
        out += ':';
        CellRef end = rg->end;
        if (end.sheet == rg->start.sheet) end.sheet.reset();
        out += to_a1(end);
    } else if (auto b = e.as<BinaryNode>()) {
        const int p = precedence(b->op);
        write_operand(*b->left, p, false, out);
        out += static_cast<char>(b->op);
        write_operand(*b->right, p, true, out);
    } else if (auto c = e.as<CallNode>()) {
        out += c->name;
        out += '(';
        for (std::size_t i = 0; i < c->args.size(); ++i) {
            if (i) out += ", ";
            write(*c->args[i], out);
        }
        out += ')';
    } else {
        out += "#REF!";
    }
}

}  // namespace

std::string serialize_expr(const Expr& expr) {
    std::string out;
    write(expr, out);
    return out;
}

std::string serialize(const Expr& expr) { return "=" + serialize_expr(expr); }

}  // namespace gensheet::formula
