#include <charconv>
#include <cstdlib>

#include "gensheet/formula/formula.hpp"

namespace gensheet::formula {

namespace {

class Parser {
public:
    explicit Parser(const std::vector<Token>& tokens) : tokens_(tokens) {}

    ExprPtr run() {
        if (tokens_.empty() || tokens_[0].kind != TokenKind::Equals) {
            throw ParseError(0, "'='", tokens_.empty() ? "end of input" : describe(tokens_[0]));
        }
        pos_ = 1;
        auto expr = concat();
        if (!at_end()) throw ParseError(peek().span.begin, "end of formula", describe(peek()));
        return expr;
    }

private:
    bool at_end() const { return pos_ >= tokens_.size(); }
    const Token& peek() const { return tokens_[pos_]; }
    bool check(TokenKind kind) const { return !at_end() && peek().kind == kind; }

    std::size_t end_position() const { return tokens_.empty() ? 0 : tokens_.back().span.end; }

    static std::string describe(const Token& t) { return std::string(to_string(t.kind)) + " \"" + t.lexeme + "\""; }

    [[noreturn]] void fail(const std::string& expected) const {
        if (at_end()) throw ParseError(end_position(), expected, "end of input");
        throw ParseError(peek().span.begin, expected, describe(peek()));
    }

    const Token& expect(TokenKind kind, const char* what) {
        if (!check(kind)) fail(what);
        return tokens_[pos_++];
    }

    ExprPtr concat() {
        auto left = additive();
        while (check(TokenKind::Amp)) {
            ++pos_;
            left = make_binary(BinaryOp::Concat, left, additive());
        }
        return left;
    }

    ExprPtr additive() {
        auto left = term();
        while (check(TokenKind::Plus) || check(TokenKind::Minus)) {
            const auto op = tokens_[pos_++].kind == TokenKind::Plus ? BinaryOp::Add : BinaryOp::Sub;
            left = make_binary(op, left, term());
        }
        return left;
    }

    ExprPtr term() {
        auto left = unary();
        while (check(TokenKind::Star) || check(TokenKind::Slash)) {
            const auto op = tokens_[pos_++].kind == TokenKind::Star ? BinaryOp::Mul : BinaryOp::Div;
            left = make_binary(op, left, unary());
        }
        return left;
    }

    // -x on a literal folds into the literal; otherwise it becomes 0-x.
    ExprPtr unary() {
        if (check(TokenKind::Minus)) {
            ++pos_;
            auto operand = unary();
            if (auto n = operand->as<NumLit>()) return make_number(-n->value);
            return make_binary(BinaryOp::Sub, make_number(0), operand);
        }
        if (check(TokenKind::Plus)) {
            ++pos_;
            return unary();
        }
        return primary();
    }

    ExprPtr primary() {
        if (at_end()) fail("expression");
        const Token& t = peek();
        switch (t.kind) {
            case TokenKind::Number: {
                ++pos_;
                double value = 0;
                auto [ptr, ec] = std::from_chars(t.lexeme.data(), t.lexeme.data() + t.lexeme.size(), value);
                if (ec != std::errc() || ptr != t.lexeme.data() + t.lexeme.size()) {
                    throw ParseError(t.span.begin, "number", describe(t));
                }
                return make_number(value);
            }
            case TokenKind::String:
                ++pos_;
                return make_text(unescape_string_lexeme(t.lexeme));
            case TokenKind::RefError:
                ++pos_;
                return make_ref_error();
            case TokenKind::CellRef: {
                ++pos_;
                auto start = *parse_cell_ref(t.lexeme);
                if (!check(TokenKind::Colon)) return make_ref(std::move(start));
                ++pos_;
                const Token& end_tok = expect(TokenKind::CellRef, "cell reference");
                auto end = *parse_cell_ref(end_tok.lexeme);
                if (start.sheet && end.sheet && *start.sheet != *end.sheet) {
                    throw ParseError(end_tok.span.begin, "reference on the same sheet", describe(end_tok));
                }
                return make_range(std::move(start), std::move(end));
            }
            case TokenKind::Ident: {
                ++pos_;
                expect(TokenKind::LParen, "'('");
                std::vector<ExprPtr> args;
                if (!check(TokenKind::RParen)) {
                    args.push_back(concat());
                    while (check(TokenKind::Comma)) {
                        ++pos_;
                        args.push_back(concat());
                    }
                }
                expect(TokenKind::RParen, "')'");
                return make_call(t.lexeme, std::move(args));
            }
            case TokenKind::LParen: {
                ++pos_;
                auto inner = concat();
                expect(TokenKind::RParen, "')'");
                return inner;
            }
            default:
                fail("expression");
        }
    }

    const std::vector<Token>& tokens_;
    std::size_t pos_ = 0;
};

}  // namespace

ExprPtr parse(const std::vector<Token>& tokens) { return Parser(tokens).run(); }

ExprPtr parse_formula(std::string_view source) { return parse(tokenize(source)); }

}  // namespace gensheet::formula
