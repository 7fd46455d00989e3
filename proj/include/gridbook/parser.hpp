#pragma once

#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridbook/ast.hpp"
#include "gridbook/printer.hpp"

namespace gridbook {

struct ParseError : std::runtime_error {
    ParseError(std::string msg, int offset, int length)
        : std::runtime_error(std::move(msg)), span{offset, length} {}
    SourceSpan span;
};

namespace detail {

enum class TokKind { Number, Text, ErrLit, Ident, LParen, RParen, Comma, Colon, Op, End };

struct Token {
    TokKind kind = TokKind::End;
    SourceSpan span;
    double number = 0;
    std::string text;                    // string value / operator text / local ident text
    std::optional<std::string> book;     // external workbook prefix
    std::optional<std::string> sheet;    // sheet prefix
    bool had_prefix = false;
    ErrorKind err = ErrorKind::VALUE;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> toks;
        for (;;) {
            Token t = next();
            bool end = t.kind == TokKind::End;
            toks.push_back(std::move(t));
            if (end) break;
        }
        return toks;
    }

private:
    [[noreturn]] void fail(const std::string& msg, int off, int len = 1) { throw ParseError(msg, off, len); }

    static bool ident_char(char c) {
        return std::isalnum((unsigned char)c) || c == '_' || c == '.' || c == '$';
    }

    Token next() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
            ++pos_;
        Token t;
        int start = int(pos_);
        t.span.offset = start;
        if (pos_ >= src_.size()) {
            t.kind = TokKind::End;
            return t;
        }
        char c = src_[pos_];
        if (std::isdigit((unsigned char)c)) return lex_number();
        if (c == '"') return lex_text();
        if (c == '#') return lex_error_literal();
        if (c == '\'' || c == '[' || c == '$' || c == '_' || std::isalpha((unsigned char)c)) return lex_identifier();
        switch (c) {
            case '(': ++pos_; t.kind = TokKind::LParen; break;
            case ')': ++pos_; t.kind = TokKind::RParen; break;
            case ',': ++pos_; t.kind = TokKind::Comma; break;
            case ':': ++pos_; t.kind = TokKind::Colon; break;
            case '+': case '-': case '*': case '/': case '^': case '&': case '%': case '=':
                ++pos_; t.kind = TokKind::Op; t.text = std::string(1, c); break;
            case '<':
                ++pos_;
                t.kind = TokKind::Op;
                if (pos_ < src_.size() && src_[pos_] == '>') { ++pos_; t.text = "<>"; }
                else if (pos_ < src_.size() && src_[pos_] == '=') { ++pos_; t.text = "<="; }
                else t.text = "<";
                break;
            case '>':
                ++pos_;
                t.kind = TokKind::Op;
                if (pos_ < src_.size() && src_[pos_] == '=') { ++pos_; t.text = ">="; }
                else t.text = ">";
                break;
            case '{':
                fail("array formulas are not supported", start);
            default:
                fail(std::string("unknown token '") + c + "'", start);
        }
        t.span.length = int(pos_) - start;
        return t;
    }

    Token lex_number() {
        Token t;
        t.kind = TokKind::Number;
        int start = int(pos_);
        t.span.offset = start;
        while (pos_ < src_.size() && std::isdigit((unsigned char)src_[pos_])) ++pos_;
        if (pos_ + 1 < src_.size() && src_[pos_] == '.' && std::isdigit((unsigned char)src_[pos_ + 1])) {
            ++pos_;
            while (pos_ < src_.size() && std::isdigit((unsigned char)src_[pos_])) ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            size_t save = pos_;
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && std::isdigit((unsigned char)src_[pos_])) {
                while (pos_ < src_.size() && std::isdigit((unsigned char)src_[pos_])) ++pos_;
            } else {
                pos_ = save;  // 'E' belongs to a following identifier, not this number
            }
        }
        t.span.length = int(pos_) - start;
        t.number = std::stod(src_.substr(start, t.span.length));
        return t;
    }

    Token lex_text() {
        Token t;
        t.kind = TokKind::Text;
        int start = int(pos_);
        t.span.offset = start;
        ++pos_;  // opening quote
        std::string out;
        for (;;) {
            if (pos_ >= src_.size()) fail("unterminated string literal", start, int(src_.size()) - start);
            char c = src_[pos_++];
            if (c == '"') {
                if (pos_ < src_.size() && src_[pos_] == '"') {
                    out += '"';
                    ++pos_;
                } else {
                    break;
                }
            } else {
                out += c;
            }
        }
        t.text = std::move(out);
        t.span.length = int(pos_) - start;
        return t;
    }

    Token lex_error_literal() {
        static const std::pair<const char*, ErrorKind> kLits[] = {
            {"#N/A", ErrorKind::NA},       {"#DIV/0!", ErrorKind::DIV0}, {"#VALUE!", ErrorKind::VALUE},
            {"#REF!", ErrorKind::REF},     {"#NAME?", ErrorKind::NAME},  {"#NUM!", ErrorKind::NUM},
        };
        int start = int(pos_);
        for (const auto& [lit, kind] : kLits) {
            size_t n = std::string(lit).size();
            if (src_.compare(pos_, n, lit) == 0) {
                Token t;
                t.kind = TokKind::ErrLit;
                t.err = kind;
                t.span = {start, int(n)};
                pos_ += n;
                return t;
            }
        }
        fail("unknown error literal", start);
    }

    // Handles: Name, A1, Sheet!A1, 'My Sheet'!A1, [book]Sheet!A1,
    // '[book]My Sheet'!A1, [book]!Name, 'C:\dir\[book]Sheet'!A1 and the
    // quote-unterminated variant 'C:\dir\[book]Sheet!A1 seen in the wild.
    Token lex_identifier() {
        Token t;
        t.kind = TokKind::Ident;
        int start = int(pos_);
        t.span.offset = start;
        if (src_[pos_] == '\'') {
            ++pos_;
            std::string prefix;
            bool closed = false;
            while (pos_ < src_.size()) {
                char c = src_[pos_];
                if (c == '\'') {
                    if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '\'') {
                        prefix += '\'';
                        pos_ += 2;
                        continue;
                    }
                    ++pos_;
                    closed = true;
                    break;
                }
                if (c == '!') break;  // lenient close: quote left open before '!'
                prefix += c;
                ++pos_;
            }
            if (pos_ >= src_.size() || src_[pos_] != '!')
                fail(closed ? "expected '!' after quoted sheet name" : "unterminated quoted sheet name", start,
                     int(pos_) - start);
            ++pos_;
            split_prefix(prefix, t, start);
            t.had_prefix = true;
        } else if (src_[pos_] == '[') {
            ++pos_;
            std::string book;
            while (pos_ < src_.size() && src_[pos_] != ']') book += src_[pos_++];
            if (pos_ >= src_.size()) fail("unterminated '[' in external reference", start, int(pos_) - start);
            ++pos_;  // ']'
            std::string sheet;
            while (pos_ < src_.size() && src_[pos_] != '!' && (ident_char(src_[pos_]) || src_[pos_] == ' '))
                sheet += src_[pos_++];
            if (pos_ >= src_.size() || src_[pos_] != '!')
                fail("expected '!' after external reference prefix", start, int(pos_) - start);
            ++pos_;
            t.book = strip_path(book);
            if (!sheet.empty()) t.sheet = sheet;
            t.had_prefix = true;
        } else {
            std::string word;
            while (pos_ < src_.size() && ident_char(src_[pos_])) word += src_[pos_++];
            if (pos_ < src_.size() && src_[pos_] == '!') {
                ++pos_;
                t.sheet = word;
                t.had_prefix = true;
            } else {
                t.text = std::move(word);
                t.span.length = int(pos_) - start;
                return t;
            }
        }
        // local part after the '!'
        std::string local;
        while (pos_ < src_.size() && ident_char(src_[pos_])) local += src_[pos_++];
        if (local.empty()) fail("expected cell address or name after '!'", int(pos_), 1);
        t.text = std::move(local);
        t.span.length = int(pos_) - start;
        return t;
    }

    // prefix text between quotes: [path][book][sheet] | path\book | sheet
    void split_prefix(const std::string& prefix, Token& t, int start) {
        auto lb = prefix.find('[');
        if (lb != std::string::npos) {
            auto rb = prefix.find(']', lb);
            if (rb == std::string::npos) fail("unterminated '[' in external reference", start, int(prefix.size()));
            t.book = prefix.substr(lb + 1, rb - lb - 1);
            std::string sheet = prefix.substr(rb + 1);
            if (!sheet.empty()) t.sheet = sheet;
            return;
        }
        if (prefix.find('\\') != std::string::npos || prefix.find('/') != std::string::npos) {
            t.book = strip_path(prefix);  // 'F:\dir\book.xls'!Name form
            return;
        }
        t.sheet = prefix;
    }

    static std::string strip_path(const std::string& s) {
        auto p = s.find_last_of("\\/");
        return p == std::string::npos ? s : s.substr(p + 1);
    }

    const std::string& src_;
    size_t pos_ = 0;
};

class Parser {
public:
    explicit Parser(const std::string& src) : src_(src), toks_(Lexer(src).run()) {}

    AstPtr parse_formula() {
        AstPtr e = expr(0);
        if (cur().kind != TokKind::End) fail("unexpected trailing input", cur());
        return e;
    }

private:
    const Token& cur() const { return toks_[idx_]; }
    const Token& peek(size_t n = 1) const { return toks_[std::min(idx_ + n, toks_.size() - 1)]; }
    Token take() { return toks_[idx_++]; }

    [[noreturn]] void fail(const std::string& msg, const Token& t) {
        throw ParseError(msg, t.span.offset, std::max(1, t.span.length));
    }

    SourceSpan span_from(int start) const {
        int end = idx_ > 0 ? toks_[idx_ - 1].span.offset + toks_[idx_ - 1].span.length : start;
        return {start, end - start};
    }

    AstPtr expr(int min_prec) {
        AstPtr lhs = prefix();
        for (;;) {
            const Token& t = cur();
            if (t.kind == TokKind::Op && t.text == "%" && kPrecPercent > min_prec) {
                take();
                lhs = make_ast(Ast::Unary{'%', lhs}, false,
                               {lhs->span.offset, t.span.offset + t.span.length - lhs->span.offset});
                continue;
            }
            if (t.kind != TokKind::Op) break;
            std::optional<BinOp> op = binop_of(t.text);
            if (!op) break;
            int p = binop_prec(*op);
            if (p <= min_prec) break;
            take();
            AstPtr rhs = expr(p);  // left-associative
            lhs = make_ast(Ast::Binary{*op, lhs, rhs}, false,
                           {lhs->span.offset, rhs->span.offset + rhs->span.length - lhs->span.offset});
        }
        return lhs;
    }

    static std::optional<BinOp> binop_of(const std::string& s) {
        if (s == "^") return BinOp::Pow;
        if (s == "*") return BinOp::Mul;
        if (s == "/") return BinOp::Div;
        if (s == "+") return BinOp::Add;
        if (s == "-") return BinOp::Sub;
        if (s == "&") return BinOp::Concat;
        if (s == "=") return BinOp::Eq;
        if (s == "<>") return BinOp::Ne;
        if (s == "<") return BinOp::Lt;
        if (s == "<=") return BinOp::Le;
        if (s == ">") return BinOp::Gt;
        if (s == ">=") return BinOp::Ge;
        return std::nullopt;
    }

    AstPtr prefix() {
        Token t = take();
        int start = t.span.offset;
        switch (t.kind) {
            case TokKind::Number:
                return make_ast(Ast::NumberLit{t.number}, false, t.span);
            case TokKind::Text:
                return make_ast(Ast::TextLit{t.text}, false, t.span);
            case TokKind::ErrLit:
                return make_ast(Ast::ErrorLit{t.err}, false, t.span);
            case TokKind::Op:
                if (t.text == "-") {
                    AstPtr operand = expr(kPrecUnaryMinus);
                    return make_ast(Ast::Unary{'-', operand}, false, span_from(start));
                }
                if (t.text == "+") return prefix();  // unary plus is a no-op
                fail("unexpected operator '" + t.text + "'", t);
            case TokKind::LParen: {
                AstPtr inner = expr(0);
                if (cur().kind != TokKind::RParen) fail("expected ')'", cur());
                take();
                auto grouped = std::make_shared<Ast>(*inner);
                grouped->grouped = true;
                grouped->span = span_from(start);
                return grouped;
            }
            case TokKind::Ident:
                return identifier(std::move(t));
            case TokKind::Comma:
            case TokKind::RParen:
            case TokKind::Colon:
            case TokKind::End:
                fail("expected expression", t);
        }
        fail("expected expression", t);
    }

    AstPtr identifier(Token t) {
        int start = t.span.offset;
        // function call
        if (!t.had_prefix && cur().kind == TokKind::LParen) {
            std::string fname = t.text;
            for (auto& c : fname) c = ascii_upper(c);
            // A1-shaped names like LOG10 are legal as function names
            bool ok = !fname.empty() && (std::isalpha((unsigned char)fname[0]) || fname[0] == '_');
            for (char c : fname)
                if (!(std::isalnum((unsigned char)c) || c == '_' || c == '.')) ok = false;
            if (!ok) fail("invalid function name '" + t.text + "'", t);
            take();  // '('
            std::vector<AstPtr> args;
            if (cur().kind != TokKind::RParen) {
                for (;;) {
                    if (cur().kind == TokKind::Comma) fail("empty function argument", cur());
                    args.push_back(expr(0));
                    if (cur().kind == TokKind::Comma) {
                        take();
                        continue;
                    }
                    break;
                }
            }
            if (cur().kind != TokKind::RParen) fail("expected ')' in function call", cur());
            take();
            return make_ast(Ast::Call{std::move(fname), std::move(args)}, false, span_from(start));
        }

        if (auto a1 = parse_a1(t.text)) {
            Ref first;
            first.workbook = t.book;
            first.sheet = t.sheet;
            first.col = a1->col;
            first.row = a1->row;
            first.col_abs = a1->col_abs;
            first.row_abs = a1->row_abs;
            if (cur().kind == TokKind::Colon) {
                take();
                if (cur().kind != TokKind::Ident) fail("expected range end after ':'", cur());
                Token t2 = take();
                auto a2 = parse_a1(t2.text);
                if (!a2) fail("invalid range end '" + t2.text + "'", t2);
                if (t2.had_prefix && !same_prefix(t, t2)) fail("range endpoints on different sheets", t2);
                Ref second;
                second.col = a2->col;
                second.row = a2->row;
                second.col_abs = a2->col_abs;
                second.row_abs = a2->row_abs;
                normalize_corners(first, second);
                return make_ast(Ast::RangeNode{first, second}, false, span_from(start));
            }
            return make_ast(Ast::RefNode{first}, false, span_from(start));
        }

        // whole-column range: B:C, $B:$D
        if (auto col1 = parse_column_token(t.text)) {
            if (cur().kind == TokKind::Colon && peek().kind == TokKind::Ident) {
                if (auto col2 = parse_column_token(peek().text)) {
                    take();  // ':'
                    take();  // second column
                    Ref first, second;
                    first.workbook = t.book;
                    first.sheet = t.sheet;
                    first.col = col1->first;
                    first.col_abs = col1->second;
                    first.col_only = true;
                    second.col = col2->first;
                    second.col_abs = col2->second;
                    second.col_only = true;
                    if (second.col < first.col) std::swap(first.col, second.col);
                    return make_ast(Ast::RangeNode{first, second}, false, span_from(start));
                }
            }
        }

        // defined name (possibly book-qualified)
        if (!is_valid_name(t.text)) fail("invalid name '" + t.text + "'", t);
        if (!t.book && t.sheet) fail("sheet-qualified names are not supported", t);
        if (ci_equal(t.text, "TRUE")) return make_ast(Ast::BoolLit{true}, false, t.span);
        if (ci_equal(t.text, "FALSE")) return make_ast(Ast::BoolLit{false}, false, t.span);
        return make_ast(Ast::NameNode{t.book, t.text}, false, t.span);
    }

    static bool same_prefix(const Token& a, const Token& b) {
        auto eq = [](const std::optional<std::string>& x, const std::optional<std::string>& y) {
            if (x.has_value() != y.has_value()) return false;
            return !x || ci_equal(*x, *y);
        };
        return eq(a.book, b.book) && eq(a.sheet, b.sheet);
    }

    // "(col, absolute)" when the token is a bare column like "C" or "$C"
    static std::optional<std::pair<int, bool>> parse_column_token(const std::string& s) {
        std::string body = s;
        bool abs = false;
        if (!body.empty() && body[0] == '$') {
            abs = true;
            body = body.substr(1);
        }
        int col = parse_column(body);
        if (col == 0) return std::nullopt;
        return std::make_pair(col, abs);
    }

    static void normalize_corners(Ref& first, Ref& second) {
        if (second.col < first.col) {
            std::swap(first.col, second.col);
            std::swap(first.col_abs, second.col_abs);
        }
        if (second.row < first.row) {
            std::swap(first.row, second.row);
            std::swap(first.row_abs, second.row_abs);
        }
    }

    const std::string& src_;
    std::vector<Token> toks_;
    size_t idx_ = 0;
};

}  // namespace detail

// Parse a formula; `text` must begin with '='. Array formulas ({=...}) are
// rejected with a dedicated message.
inline AstPtr parse(const std::string& text) {
    if (!text.empty() && text[0] == '{')
        throw ParseError("array formulas are not supported", 0, int(text.size()));
    if (text.empty() || text[0] != '=') throw ParseError("formula must begin with '='", 0, 1);
    if (text.size() > 1 && text[1] == '{')
        throw ParseError("array formulas are not supported", 1, int(text.size()) - 1);
    detail::Parser p(text.substr(1));
    AstPtr ast = p.parse_formula();
    // spans are relative to the text after '='; shift to the full source
    struct Shift {
        static AstPtr apply(const AstPtr& a) {
            auto b = std::make_shared<Ast>(*a);
            b->span.offset += 1;
            if (auto* u = std::get_if<Ast::Unary>(&b->node)) u->operand = apply(u->operand);
            if (auto* bi = std::get_if<Ast::Binary>(&b->node)) {
                bi->lhs = apply(bi->lhs);
                bi->rhs = apply(bi->rhs);
            }
            if (auto* c = std::get_if<Ast::Call>(&b->node))
                for (auto& arg : c->args) arg = apply(arg);
            return b;
        }
    };
    return Shift::apply(ast);
}

}  // namespace gridbook
