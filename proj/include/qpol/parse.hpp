#pragma once

#include "qpol/algebra.hpp"

#include <cctype>
#include <map>
#include <sstream>
#include <string>

namespace qpol {

// Shared expression grammar:
//   expr     := term (('+'|'-') term)*
//   term     := factor ('*' factor)*
//   factor   := rational | name | 'pd(' name ')' | 'dd(' name ')'
//             | factor '^' integer | '(' expr ')'
//   rational := integer | integer '/' positive-integer
// 'hbar' is reserved for the formal quantisation parameter.

struct ParseError : Error {
    int line, col;
    ParseError(const std::string& msg, int l, int c)
        : Error(msg + " at line " + std::to_string(l) + ", column " + std::to_string(c)),
          line(l), col(c) {}
};

namespace detail {

// expression with an hbar power carried per term
using HbarTerms = std::map<int, Expr>;

class Parser {
  public:
    Parser(const std::string& src, Algebra alg) : src_(src), alg_(std::move(alg)) {}

    HbarTerms parse() {
        skip_ws();
        HbarTerms r = parse_expr();
        if (pos_ != src_.size())
            fail("unexpected trailing input");
        return r;
    }

  private:
    [[noreturn]] void fail(const std::string& msg) const {
        int line = 1, col = 1;
        for (size_t i = 0; i < pos_ && i < src_.size(); ++i) {
            if (src_[i] == '\n') { ++line; col = 1; }
            else ++col;
        }
        throw ParseError(msg, line, col);
    }
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
    }
    bool eat(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) { ++pos_; return true; }
        return false;
    }
    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    static HbarTerms& add_into(HbarTerms& a, const HbarTerms& b, int sign) {
        for (auto& [k, e] : b) {
            auto it = a.find(k);
            Expr v = sign < 0 ? -e : e;
            if (it == a.end())
                a[k] = v;
            else {
                it->second = it->second + v;
                if (it->second.is_zero())
                    a.erase(it);
            }
        }
        return a;
    }

    HbarTerms parse_expr() {
        HbarTerms acc = parse_term();
        for (;;) {
            if (eat('+'))
                add_into(acc, parse_term(), +1);
            else if (eat('-'))
                add_into(acc, parse_term(), -1);
            else
                return acc;
        }
    }

    HbarTerms parse_term() {
        HbarTerms acc = parse_factor();
        while (eat('*'))
            acc = multiply(acc, parse_factor());
        return acc;
    }

    static HbarTerms multiply(const HbarTerms& a, const HbarTerms& b) {
        HbarTerms r;
        for (auto& [ka, ea] : a)
            for (auto& [kb, eb] : b) {
                Expr p = ea * eb;
                if (p.is_zero()) continue;
                auto it = r.find(ka + kb);
                if (it == r.end())
                    r[ka + kb] = p;
                else {
                    it->second = it->second + p;
                    if (it->second.is_zero())
                        r.erase(it);
                }
            }
        return r;
    }

    HbarTerms parse_factor() {
        HbarTerms base;
        char c = peek();
        if (c == '(') {
            eat('(');
            base = parse_expr();
            if (!eat(')'))
                fail("expected ')'");
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            base = {{0, Expr::constant(alg_, parse_rational())}};
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string name = parse_name();
            if (name == "pd" || name == "dd") {
                if (!eat('('))
                    fail("expected '(' after " + name);
                std::string g = parse_name();
                if (!eat(')'))
                    fail("expected ')'");
                int i = alg_.find(g);
                if (i < 0)
                    fail("unknown generator '" + g + "'");
                base = {{0, Expr::symbol(alg_, name == "pd" ? SymKind::Vec : SymKind::Form, i)}};
            } else if (name == "hbar") {
                base = {{1, Expr::constant(alg_, 1)}};
            } else {
                int i = alg_.find(name);
                if (i < 0)
                    fail("unknown generator '" + name + "'");
                base = {{0, Expr::generator(alg_, i)}};
            }
        } else {
            fail("expected a factor");
        }
        while (peek() == '^') {
            eat('^');
            long long n = parse_integer();
            base = power(base, n);
        }
        return base;
    }

    HbarTerms power(const HbarTerms& b, long long n) {
        if (n == 0)
            return {{0, Expr::constant(alg_, 1)}};
        if (n < 0) {
            // only single monomials in hbar and invertible generators can be inverted
            if (b.size() != 1)
                fail("negative power of a sum");
            auto& [k, e] = *b.begin();
            if (e.term_count() != 1)
                fail("negative power of a sum");
            auto& [w, coef] = *e.terms().begin();
            Word nw;
            for (auto& [key, exp] : w) {
                if (sym_kind(key) != SymKind::Gen || !alg_.gen(sym_gen(key)).invertible)
                    fail("negative power of a non-invertible factor");
                nw.push_back({key, -exp});
            }
            HbarTerms inv;
            inv[-k] = Expr::from_terms(alg_, {{nw, Rational(1) / coef}});
            return power(inv, -n);
        }
        HbarTerms acc = {{0, Expr::constant(alg_, 1)}};
        HbarTerms p = b;
        while (n) {
            if (n & 1)
                acc = multiply(acc, p);
            n >>= 1;
            if (n)
                p = multiply(p, p);
        }
        return acc;
    }

    std::string parse_name() {
        skip_ws();
        size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        if (start == pos_)
            fail("expected a name");
        return src_.substr(start, pos_ - start);
    }

    long long parse_integer() {
        skip_ws();
        bool neg = eat('-');
        skip_ws();
        size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
        if (start == pos_)
            fail("expected an integer");
        long long v = std::stoll(src_.substr(start, pos_ - start));
        return neg ? -v : v;
    }

    Rational parse_rational() {
        long long num = parse_integer();
        size_t save = pos_;
        if (eat('/')) {
            if (std::isdigit(static_cast<unsigned char>(peek()))) {
                long long den = parse_integer();
                if (den <= 0)
                    fail("denominator must be positive");
                return Rational(num) / den;
            }
            pos_ = save; // the '/' belonged to something else; grammar has none, backtrack
        }
        return Rational(num);
    }

    const std::string& src_;
    Algebra alg_;
    size_t pos_ = 0;
};

} // namespace detail

/// Parse an hbar-free expression.
inline Expr parse_expr(const std::string& src, const Algebra& alg) {
    auto t = detail::Parser(src, alg).parse();
    for (auto& [k, e] : t)
        if (k != 0)
            throw Error("unexpected hbar in expression: " + src);
    return t.empty() ? Expr(alg) : t.begin()->second;
}

/// Parse an expression that may carry hbar powers; returns exponent -> part.
inline std::map<int, Expr> parse_hbar_expr(const std::string& src, const Algebra& alg) {
    return detail::Parser(src, alg).parse();
}

// ---- canonical serialisation ----

namespace detail {

inline void append_factor(std::string& s, const std::string& f, bool& first) {
    if (!first)
        s += "*";
    s += f;
    first = false;
}

inline std::string term_string(const Algebra& alg, const Word& w, const Rational& coef,
                               int hbar_exp) {
    std::string s;
    Rational a = abs(coef);
    bool first = true;
    if (a != 1 || (w.empty() && hbar_exp == 0))
        append_factor(s, rational_string(a), first);
    if (hbar_exp != 0) {
        append_factor(s, hbar_exp == 1 ? "hbar" : "hbar^" + std::to_string(hbar_exp), first);
    }
    for (auto& [key, exp] : w) {
        const std::string& n = alg.gen(sym_gen(key)).name;
        std::string f;
        switch (sym_kind(key)) {
        case SymKind::Gen: f = n; break;
        case SymKind::Form: f = "dd(" + n + ")"; break;
        case SymKind::Vec: f = "pd(" + n + ")"; break;
        }
        if (exp != 1)
            f += "^" + std::to_string(exp);
        append_factor(s, f, first);
    }
    return s;
}

} // namespace detail

inline std::string to_string_with_hbar(const Expr& e, int hbar_exp) {
    if (e.is_zero())
        return "0";
    std::string s;
    bool first = true;
    for (auto& [w, c] : e.terms()) {
        if (first) {
            if (c < 0)
                s += "-";
            first = false;
        } else {
            s += c < 0 ? " - " : " + ";
        }
        s += detail::term_string(e.algebra(), w, c, hbar_exp);
    }
    return s;
}

inline std::string to_string(const Expr& e) { return to_string_with_hbar(e, 0); }

} // namespace qpol
