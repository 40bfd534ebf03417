// Recursive-descent parser for the concrete PCTL* grammar (docs/grammar.md).

#include "pctl/formula.hpp"

#include <cctype>

namespace pctl {

ParseError::ParseError(const std::string& msg, std::size_t pos)
    : std::runtime_error("parse error at " + std::to_string(pos) + ": " + msg), pos_(pos) {}

namespace {

enum class Tok : std::uint8_t {
    End, Ident, LParen, RParen, Not, And, Or, Implies,
    Next, Until, Finally, Globally, Release, WeakUntil, True, False, Prob
};

struct Token {
    Tok kind = Tok::End;
    std::size_t pos = 0;
    std::string text;
    Cmp cmp = Cmp::Ge;
    Bound bound{};
};

class Lexer {
public:
    explicit Lexer(const std::string& s) : s_(s) {}

    Token next() {
        skip_ws();
        Token t;
        t.pos = i_;
        if (i_ >= s_.size()) return t;
        char c = s_[i_];
        if (c == '(') { ++i_; t.kind = Tok::LParen; return t; }
        if (c == ')') { ++i_; t.kind = Tok::RParen; return t; }
        if (c == '!') { ++i_; t.kind = Tok::Not; return t; }
        if (c == '&') { ++i_; t.kind = Tok::And; return t; }
        if (c == '|') { ++i_; t.kind = Tok::Or; return t; }
        if (c == '-') {
            if (i_ + 1 < s_.size() && s_[i_ + 1] == '>') {
                i_ += 2;
                t.kind = Tok::Implies;
                return t;
            }
            throw ParseError("expected '->'", i_);
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = i_;
            while (i_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_'))
                ++i_;
            t.text = s_.substr(start, i_ - start);
            if (t.text == "P" && peek_cmp()) return prob_token(t);
            t.kind = keyword(t.text);
            return t;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", i_);
    }

private:
    void skip_ws() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }

    bool peek_cmp() {
        skip_ws();
        return i_ < s_.size() && (s_[i_] == '<' || s_[i_] == '>');
    }

    static Tok keyword(const std::string& w) {
        if (w == "X") return Tok::Next;
        if (w == "U") return Tok::Until;
        if (w == "F") return Tok::Finally;
        if (w == "G") return Tok::Globally;
        if (w == "R") return Tok::Release;
        if (w == "W") return Tok::WeakUntil;
        if (w == "true") return Tok::True;
        if (w == "false") return Tok::False;
        return Tok::Ident;
    }

    Token prob_token(Token t) {
        t.kind = Tok::Prob;
        bool less = s_[i_] == '<';
        ++i_;
        bool eq = i_ < s_.size() && s_[i_] == '=';
        if (eq) ++i_;
        t.cmp = less ? (eq ? Cmp::Le : Cmp::Lt) : (eq ? Cmp::Ge : Cmp::Gt);
        skip_ws();
        std::size_t start = i_;
        std::int64_t whole = 0;
        std::size_t nd = 0;
        while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) {
            if (whole < Bound::kScale) whole = whole * 10 + (s_[i_] - '0');
            ++i_;
            ++nd;
        }
        if (nd == 0) throw ParseError("expected probability bound", start);
        std::int64_t frac = 0;
        std::size_t nf = 0;
        if (i_ < s_.size() && s_[i_] == '.') {
            ++i_;
            while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) {
                if (nf == 9) throw ParseError("more than 9 fractional digits", i_);
                frac = frac * 10 + (s_[i_] - '0');
                ++i_;
                ++nf;
            }
            if (nf == 0) throw ParseError("expected digits after '.'", i_);
        }
        for (std::size_t k = nf; k < 9; ++k) frac *= 10;
        if (whole > 1 || (whole == 1 && frac != 0)) throw ParseError("bound outside [0,1]", start);
        t.bound = Bound{whole * Bound::kScale + frac};
        return t;
    }

    const std::string& s_;
    std::size_t i_ = 0;
};

class Parser {
public:
    explicit Parser(const std::string& s) : lex_(s) { advance(); }

    Formula run() {
        Formula f = implication();
        if (cur_.kind != Tok::End) throw ParseError("unexpected trailing input", cur_.pos);
        return f;
    }

private:
    void advance() { cur_ = lex_.next(); }

    bool accept(Tok k) {
        if (cur_.kind != k) return false;
        advance();
        return true;
    }

    Formula implication() {
        Formula lhs = disjunction();
        if (accept(Tok::Implies)) return implies(lhs, implication());
        return lhs;
    }

    Formula disjunction() {
        Formula f = conjunction();
        while (accept(Tok::Or)) f = disj(f, conjunction());
        return f;
    }

    Formula conjunction() {
        Formula f = binary_temporal();
        while (accept(Tok::And)) f = conj(f, binary_temporal());
        return f;
    }

    Formula binary_temporal() {
        Formula lhs = unary();
        if (accept(Tok::Until)) return until(lhs, binary_temporal());
        if (accept(Tok::Release)) return release(lhs, binary_temporal());
        if (accept(Tok::WeakUntil)) return weak_until(lhs, binary_temporal());
        return lhs;
    }

    Formula unary() {
        Token t = cur_;
        switch (t.kind) {
            case Tok::Not: advance(); return neg(unary());
            case Tok::Next: advance(); return next(unary());
            case Tok::Finally: advance(); return eventually(unary());
            case Tok::Globally: advance(); return always(unary());
            case Tok::Prob: advance(); return prob(t.cmp, t.bound, unary());
            default: return primary();
        }
    }

    Formula primary() {
        Token t = cur_;
        switch (t.kind) {
            case Tok::True: advance(); return f_true();
            case Tok::False: advance(); return f_false();
            case Tok::Ident: advance(); return atom(t.text);
            case Tok::LParen: {
                advance();
                Formula f = implication();
                if (!accept(Tok::RParen)) throw ParseError("expected ')'", cur_.pos);
                return f;
            }
            case Tok::End: throw ParseError("unexpected end of input", t.pos);
            default: throw ParseError("unexpected token", t.pos);
        }
    }

    Lexer lex_;
    Token cur_;
};

}  // namespace

Formula parse_formula(const std::string& text) { return Parser(text).run(); }

Formula parse(const std::string& text) {
    Formula f = parse_formula(text);
    if (!is_state_formula(f)) throw ParseError("top-level formula is not a state formula", 0);
    return f;
}

}  // namespace pctl
