#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gensheet/formula/ast.hpp"

namespace gensheet::formula {

enum class TokenKind {
    Equals,
    Ident,
    Number,
    String,
    CellRef,
    Colon,
    Comma,
    LParen,
    RParen,
    Amp,
    Plus,
    Minus,
    Star,
    Slash,
    RefError,  // literal `#REF!` left behind by reference rewriting
};

const char* to_string(TokenKind kind);

struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// STRING lexemes keep their surrounding quotes and `""` escapes.
struct Token {
    TokenKind kind;
    std::string lexeme;
    Span span;
};

class FormulaError : public std::runtime_error {
public:
    FormulaError(const std::string& what, std::size_t position)
        : std::runtime_error(what), position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

class LexError : public FormulaError {
public:
    LexError(std::size_t position, std::string found);
    const std::string& found() const { return found_; }

private:
    std::string found_;
};

class ParseError : public FormulaError {
public:
    ParseError(std::size_t position, std::string expected, std::string found);
    const std::string& expected() const { return expected_; }
    const std::string& found() const { return found_; }

private:
    std::string expected_;
    std::string found_;
};

std::vector<Token> tokenize(std::string_view source);
ExprPtr parse(const std::vector<Token>& tokens);

/// tokenize + parse.
ExprPtr parse_formula(std::string_view source);

/// Canonical text with the leading `=`: no spaces except one after each comma.
std::string serialize(const Expr& expr);
std::string serialize_expr(const Expr& expr);

/// Shortest round-trip decimal form, used for literals and text coercion.
std::string format_number(double value);

/// Shifts every relative component. A shift off the grid turns the
/// reference (or the whole range) into a RefErrorNode.
ExprPtr rewrite_refs(const ExprPtr& ast, int32_t delta_col, int32_t delta_row);

/// Points references qualified with sheet `from` at sheet `to`.
ExprPtr rename_sheet(const ExprPtr& ast, const std::string& from, const std::string& to);

std::string unescape_string_lexeme(std::string_view lexeme);
std::string quote_string(std::string_view text);

}  // namespace gensheet::formula
