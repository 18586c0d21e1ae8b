#include <cctype>

#include "gensheet/formula/formula.hpp"

namespace gensheet::formula {

const char* to_string(TokenKind kind) {
    switch (kind) {
        case TokenKind::Equals: return "EQUALS";
        case TokenKind::Ident: return "IDENT";
        case TokenKind::Number: return "NUMBER";
        case TokenKind::String: return "STRING";
        case TokenKind::CellRef: return "CELL_REF";
        case TokenKind::Colon: return "COLON";
        case TokenKind::Comma: return "COMMA";
        case TokenKind::LParen: return "LPAREN";
        case TokenKind::RParen: return "RPAREN";
        case TokenKind::Amp: return "AMP";
        case TokenKind::Plus: return "PLUS";
        case TokenKind::Minus: return "MINUS";
        case TokenKind::Star: return "STAR";
        case TokenKind::Slash: return "SLASH";
        case TokenKind::RefError: return "REF_ERROR";
    }
    return "?";
}

LexError::LexError(std::size_t position, std::string found)
    : FormulaError("unexpected '" + found + "' at position " + std::to_string(position), position),
      found_(std::move(found)) {}

ParseError::ParseError(std::size_t position, std::string expected, std::string found)
    : FormulaError("expected " + expected + " but found " + found + " at position " +
                       std::to_string(position),
                   position),
      expected_(std::move(expected)),
      found_(std::move(found)) {}

namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '$'; }

// One UTF-8 scalar starting at pos, for error messages.
std::string char_at(std::string_view s, std::size_t pos) {
    const auto lead = static_cast<unsigned char>(s[pos]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    return std::string(s.substr(pos, len));
}

bool is_identifier(std::string_view s) {
    if (s.empty() || !is_alpha(s[0])) return false;
    for (char c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    }
    return true;
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        if (src_.empty() || src_[0] != '=') {
            throw LexError(0, src_.empty() ? std::string("end of input") : char_at(src_, 0));
        }
        push(TokenKind::Equals, 0, 1);
        pos_ = 1;
        while (true) {
            skip_space();
            if (pos_ >= src_.size()) break;
            lex_one();
        }
        return std::move(tokens_);
    }

private:
    void push(TokenKind kind, std::size_t begin, std::size_t end) {
        tokens_.push_back(Token{kind, std::string(src_.substr(begin, end - begin)), Span{begin, end}});
    }

    void skip_space() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) ++pos_;
    }

    void lex_one() {
        const char c = src_[pos_];
        const std::size_t begin = pos_;
        switch (c) {
            case ':': ++pos_; return push(TokenKind::Colon, begin, pos_);
            case ',': ++pos_; return push(TokenKind::Comma, begin, pos_);
            case '(': ++pos_; return push(TokenKind::LParen, begin, pos_);
            case ')': ++pos_; return push(TokenKind::RParen, begin, pos_);
            case '&': ++pos_; return push(TokenKind::Amp, begin, pos_);
            case '+': ++pos_; return push(TokenKind::Plus, begin, pos_);
            case '-': ++pos_; return push(TokenKind::Minus, begin, pos_);
            case '*': ++pos_; return push(TokenKind::Star, begin, pos_);
            case '/': ++pos_; return push(TokenKind::Slash, begin, pos_);
            case '"': return lex_string();
            case '\'': return lex_word();
            case '#':
                if (src_.substr(pos_, 5) == "#REF!") {
                    pos_ += 5;
                    return push(TokenKind::RefError, begin, pos_);
                }
                throw LexError(pos_, "#");
            default: break;
        }
        if (is_digit(c) || (c == '.' && pos_ + 1 < src_.size() && is_digit(src_[pos_ + 1]))) {
            return lex_number();
        }
        if (is_alpha(c) || c == '$' || c == '_') return lex_word();
        throw LexError(pos_, char_at(src_, pos_));
    }

    void lex_number() {
        const std::size_t begin = pos_;
        while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
            if (p < src_.size() && is_digit(src_[p])) {
                pos_ = p;
                while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
            }
        }
        push(TokenKind::Number, begin, pos_);
    }

    void lex_string() {
        const std::size_t begin = pos_;
        ++pos_;
        while (pos_ < src_.size()) {
            if (src_[pos_] == '"') {
                if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '"') {
                    pos_ += 2;
                    continue;
                }
                ++pos_;
                return push(TokenKind::String, begin, pos_);
            }
            ++pos_;
        }
        throw LexError(begin, "\"");
    }

    // Identifiers, cell references and sheet-qualified references.
    void lex_word() {
        const std::size_t begin = pos_;
        if (src_[pos_] == '\'') {
            ++pos_;
            while (true) {
                if (pos_ >= src_.size()) throw LexError(begin, "'");
                if (src_[pos_] == '\'') {
                    if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '\'') {
                        pos_ += 2;
                        continue;
                    }
                    ++pos_;
                    break;
                }
                ++pos_;
            }
            if (pos_ >= src_.size() || src_[pos_] != '!') {
                throw LexError(pos_, pos_ >= src_.size() ? std::string("end of input") : char_at(src_, pos_));
            }
            return lex_qualified(begin);
        }
        while (pos_ < src_.size() && is_word(src_[pos_])) ++pos_;
        const auto word = src_.substr(begin, pos_ - begin);
        if (pos_ < src_.size() && src_[pos_] == '!') {
            if (!is_identifier(word)) throw LexError(begin, std::string(word));
            return lex_qualified(begin);
        }
        std::size_t look = pos_;
        while (look < src_.size() && (src_[look] == ' ' || src_[look] == '\t')) ++look;
        const bool call_follows = look < src_.size() && src_[look] == '(';
        if (!call_follows && parse_cell_ref(word)) return push(TokenKind::CellRef, begin, pos_);
        if (is_identifier(word)) return push(TokenKind::Ident, begin, pos_);
        throw LexError(begin, std::string(word));
    }

    // pos_ sits on the '!' of `sheet!A1`.
    void lex_qualified(std::size_t begin) {
        ++pos_;
        const std::size_t ref_begin = pos_;
        while (pos_ < src_.size() && is_word(src_[pos_])) ++pos_;
        if (!parse_cell_ref(src_.substr(begin, pos_ - begin))) {
            throw LexError(ref_begin, ref_begin < src_.size() ? std::string(src_.substr(ref_begin, pos_ - ref_begin))
                                                             : std::string("end of input"));
        }
        push(TokenKind::CellRef, begin, pos_);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::vector<Token> tokens_;
};

}  // namespace

std::vector<Token> tokenize(std::string_view source) { return Lexer(source).run(); }

std::string unescape_string_lexeme(std::string_view lexeme) {
    std::string out;
    if (lexeme.size() < 2) return out;
    const auto body = lexeme.substr(1, lexeme.size() - 2);
    for (std::size_t i = 0; i < body.size(); ++i) {
        out.push_back(body[i]);
        if (body[i] == '"' && i + 1 < body.size() && body[i + 1] == '"') ++i;
    }
    return out;
}

std::string quote_string(std::string_view text) {
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

}  // namespace gensheet::formula
