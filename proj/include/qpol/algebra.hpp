#pragma once

#include "qpol/rational.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qpol {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GeneratorSpec {
    std::string name;
    int degree = 0;
    bool invertible = false; // permitted only in degree 0
};

// A term is a word of symbols. Three kinds share one merge/sign engine:
//   Gen  g      -- algebra generator, Koszul parity deg(g)
//   Form dd(g)  -- de Rham symbol dg, parity deg(g)+1, one unit of Hodge weight
//   Vec  pd(g)  -- vector symbol, parity deg(g)+1, one unit of polyvector weight
// Keys are kind-major so canonical words read (gens)(forms)(vectors).
enum class SymKind : int { Gen = 0, Form = 1, Vec = 2 };

constexpr int kSymShift = 20;
constexpr int sym_key(SymKind k, int gen) { return (static_cast<int>(k) << kSymShift) | gen; }
constexpr SymKind sym_kind(int key) { return static_cast<SymKind>(key >> kSymShift); }
constexpr int sym_gen(int key) { return key & ((1 << kSymShift) - 1); }

using Word = std::vector<std::pair<int, int>>; // (symbol key, exponent), key-sorted
using TermMap = std::map<Word, Rational>;

struct AlgebraData {
    std::vector<GeneratorSpec> gens;
    std::map<std::string, int> index;
    std::vector<TermMap> delta; // differential per generator, empty map = 0
};

class Algebra {
  public:
    Algebra() = default;
    explicit Algebra(std::shared_ptr<const AlgebraData> d) : d_(std::move(d)) {}

    bool valid() const { return static_cast<bool>(d_); }
    int size() const { return static_cast<int>(d_->gens.size()); }
    const GeneratorSpec& gen(int i) const { return d_->gens[i]; }
    const std::vector<GeneratorSpec>& gens() const { return d_->gens; }

    int find(const std::string& name) const {
        auto it = d_->index.find(name);
        return it == d_->index.end() ? -1 : it->second;
    }
    const TermMap& delta_of(int i) const { return d_->delta[i]; }

    int degree_of_key(int key) const {
        int d = d_->gens[sym_gen(key)].degree;
        switch (sym_kind(key)) {
        case SymKind::Gen: return d;
        case SymKind::Form: return d + 1; // contribution to total (DR) degree
        case SymKind::Vec: return -d - 1; // contribution to total (DR^r) degree
        }
        return 0;
    }
    // Koszul parity of one symbol; equals degree_of_key mod 2 for every kind.
    int parity_of_key(int key) const { return ((degree_of_key(key) % 2) + 2) % 2; }

    bool compatible(const Algebra& o) const {
        if (d_ == o.d_) return true;
        if (!d_ || !o.d_) return false;
        if (d_->gens.size() != o.d_->gens.size()) return false;
        for (size_t i = 0; i < d_->gens.size(); ++i) {
            const auto &a = d_->gens[i], &b = o.d_->gens[i];
            if (a.name != b.name || a.degree != b.degree || a.invertible != b.invertible)
                return false;
        }
        return true;
    }

  private:
    std::shared_ptr<const AlgebraData> d_;
};

namespace detail {

// Koszul sign for merging canonical words a, b into the canonical word of a*b.
// Returns 0 when an odd symbol would square.
inline int merge_words(const Algebra& alg, const Word& a, const Word& b, Word& out) {
    out.clear();
    out.reserve(a.size() + b.size());
    // odd_suffix[i] = parity mass of a[i..] (sum of exp*parity mod 2)
    std::vector<int> odd_suffix(a.size() + 1, 0);
    for (int i = static_cast<int>(a.size()) - 1; i >= 0; --i) {
        int p = alg.parity_of_key(a[i].first) ? (std::abs(a[i].second) % 2) : 0;
        odd_suffix[i] = (odd_suffix[i + 1] + p) % 2;
    }
    size_t i = 0, j = 0;
    int sign = 0; // exponent of -1
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
            out.push_back(a[i]);
            ++i;
        } else if (i == a.size() || b[j].first < a[i].first) {
            int par = alg.parity_of_key(b[j].first);
            if (par)
                sign = (sign + (std::abs(b[j].second) % 2) * odd_suffix[i]) % 2;
            out.push_back(b[j]);
            ++j;
        } else { // equal keys
            int par = alg.parity_of_key(a[i].first);
            if (par && (a[i].second + b[j].second >= 2))
                return 0; // odd symbol squared
            if (par)
                sign = (sign + (std::abs(b[j].second) % 2) * odd_suffix[i + 1]) % 2;
            int e = a[i].second + b[j].second;
            if (e != 0)
                out.push_back({a[i].first, e});
            ++i;
            ++j;
        }
    }
    return sign ? -1 : 1;
}

} // namespace detail

// Immutable graded expression: exact-rational combination of canonical words.
// Houses algebra elements, de Rham forms, polyvectors, and the mixed objects
// the Gorenstein reduction produces, depending on which symbol kinds occur.
class Expr {
  public:
    Expr() = default;
    explicit Expr(Algebra alg) : alg_(std::move(alg)) {}

    static Expr constant(const Algebra& alg, const Rational& c) {
        Expr e(alg);
        if (c != 0)
            e.terms_[{}] = c;
        return e;
    }
    static Expr symbol(const Algebra& alg, SymKind k, int gen, int exp = 1) {
        if (gen < 0 || gen >= alg.size())
            throw Error("unknown generator index");
        Expr e(alg);
        if (exp != 0)
            e.terms_[{{sym_key(k, gen), exp}}] = 1;
        else
            e.terms_[{}] = 1;
        return e;
    }
    static Expr generator(const Algebra& alg, int gen, int exp = 1) {
        const auto& g = alg.gen(gen);
        if (g.degree % 2 != 0 && (exp < 0 || exp > 1))
            throw Error("odd generator exponent must be 0 or 1: " + g.name);
        if (exp < 0 && !g.invertible)
            throw Error("negative exponent on non-invertible generator: " + g.name);
        return symbol(alg, SymKind::Gen, gen, exp);
    }
    static Expr from_terms(const Algebra& alg, TermMap terms) {
        Expr e(alg);
        e.terms_ = std::move(terms);
        e.prune();
        return e;
    }

    const Algebra& algebra() const { return alg_; }
    const TermMap& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    size_t term_count() const { return terms_.size(); }

    bool operator==(const Expr& o) const { return terms_ == o.terms_; }
    bool operator!=(const Expr& o) const { return !(*this == o); }

    Expr operator-() const {
        Expr r(alg_);
        for (auto& [w, c] : terms_)
            r.terms_[w] = -c;
        return r;
    }
    Expr operator+(const Expr& o) const {
        check(o);
        Expr r = alg_.valid() ? *this : o;
        if (!alg_.valid()) return r;
        for (auto& [w, c] : o.terms_) {
            auto it = r.terms_.find(w);
            if (it == r.terms_.end())
                r.terms_[w] = c;
            else {
                it->second += c;
                if (it->second == 0)
                    r.terms_.erase(it);
            }
        }
        return r;
    }
    Expr operator-(const Expr& o) const { return *this + (-o); }
    Expr operator*(const Rational& c) const {
        Expr r(alg_);
        if (c == 0) return r;
        for (auto& [w, k] : terms_)
            r.terms_[w] = k * c;
        return r;
    }
    friend Expr operator*(const Rational& c, const Expr& e) { return e * c; }

    Expr operator*(const Expr& o) const {
        check(o);
        const Algebra& alg = alg_.valid() ? alg_ : o.alg_;
        Expr r(alg);
        Word merged;
        for (auto& [wa, ca] : terms_) {
            for (auto& [wb, cb] : o.terms_) {
                int s = detail::merge_words(alg, wa, wb, merged);
                if (s == 0) continue;
                Rational c = ca * cb * s;
                auto it = r.terms_.find(merged);
                if (it == r.terms_.end())
                    r.terms_[merged] = c;
                else {
                    it->second += c;
                    if (it->second == 0)
                        r.terms_.erase(it);
                }
            }
        }
        return r;
    }

    // ---- per-word bookkeeping ----
    int word_parity(const Word& w) const {
        int p = 0;
        for (auto& [k, e] : w)
            p = (p + alg_.parity_of_key(k) * (std::abs(e) % 2)) % 2;
        return p;
    }
    // total degree: gen deg + (deg g + 1) per dd(g) + (-deg g - 1) per pd(g);
    // restricts to element degree, de Rham total degree, DR^r degree.
    int word_total_degree(const Word& w) const {
        int d = 0;
        for (auto& [k, e] : w)
            d += alg_.degree_of_key(k) * e;
        return d;
    }
    static int word_weight(const Word& w, SymKind kind) {
        int n = 0;
        for (auto& [k, e] : w)
            if (sym_kind(k) == kind)
                n += e;
        return n;
    }
    int word_pol_degree(const Word& w) const { // deg(coeff) + sum(-deg g) over pd
        int d = 0;
        for (auto& [k, e] : w) {
            if (sym_kind(k) == SymKind::Gen)
                d += alg_.gen(sym_gen(k)).degree * e;
            else if (sym_kind(k) == SymKind::Vec)
                d += -alg_.gen(sym_gen(k)).degree * e;
            else
                d += (alg_.gen(sym_gen(k)).degree + 1) * e;
        }
        return d;
    }

    bool has_kind(SymKind kind) const {
        for (auto& [w, c] : terms_)
            for (auto& [k, e] : w)
                if (sym_kind(k) == kind)
                    return true;
        return false;
    }
    // defined only on homogeneous input
    std::optional<int> total_degree() const {
        std::optional<int> d;
        for (auto& [w, c] : terms_) {
            int wd = word_total_degree(w);
            if (!d)
                d = wd;
            else if (*d != wd)
                return std::nullopt;
        }
        return terms_.empty() ? std::optional<int>(0) : d;
    }
    std::optional<int> weight(SymKind kind) const {
        std::optional<int> p;
        for (auto& [w, c] : terms_) {
            int ww = word_weight(w, kind);
            if (!p)
                p = ww;
            else if (*p != ww)
                return std::nullopt;
        }
        return terms_.empty() ? std::optional<int>(0) : p;
    }
    int max_weight(SymKind kind) const {
        int m = 0;
        for (auto& [w, c] : terms_)
            m = std::max(m, word_weight(w, kind));
        return m;
    }
    // weight-w part (in the given symbol kind)
    Expr component(SymKind kind, int wgt) const {
        Expr r(alg_);
        for (auto& [w, c] : terms_)
            if (word_weight(w, kind) == wgt)
                r.terms_[w] = c;
        return r;
    }
    // total-degree-d part
    Expr degree_component(int d) const {
        Expr r(alg_);
        for (auto& [w, c] : terms_)
            if (word_total_degree(w) == d)
                r.terms_[w] = c;
        return r;
    }

    Rational coefficient(const Word& w) const {
        auto it = terms_.find(w);
        return it == terms_.end() ? Rational(0) : it->second;
    }

  private:
    void check(const Expr& o) const {
        if (alg_.valid() && o.alg_.valid() && !alg_.compatible(o.alg_))
            throw Error("mixing elements of different algebras");
    }
    void prune() {
        for (auto it = terms_.begin(); it != terms_.end();)
            it = (it->second == 0) ? terms_.erase(it) : std::next(it);
    }

    Algebra alg_;
    TermMap terms_;
};

using Element = Expr;
using DeRhamForm = Expr;
using Polyvector = Expr;

// ---- algebra construction ----

class AlgebraBuilder {
  public:
    AlgebraBuilder& add(const std::string& name, int degree, bool invertible = false) {
        if (invertible && degree != 0)
            throw Error("invertible generator must have degree 0: " + name);
        if (data_.index.count(name))
            throw Error("duplicate generator name: " + name);
        if (name == "hbar" || name == "pd" || name == "dd")
            throw Error("reserved name: " + name);
        data_.index[name] = static_cast<int>(data_.gens.size());
        data_.gens.push_back({name, degree, invertible});
        return *this;
    }
    // finish generator list; differentials may then be attached via with_delta
    Algebra build() const {
        auto d = std::make_shared<AlgebraData>(data_);
        d->delta.assign(d->gens.size(), {});
        return Algebra(d);
    }

  private:
    AlgebraData data_;
};

// returns a copy of `alg` carrying the given differentials (expressions over `alg`)
inline Algebra with_delta(const Algebra& alg, const std::vector<std::pair<int, Expr>>& deltas) {
    auto d = std::make_shared<AlgebraData>();
    d->gens = alg.gens();
    for (int i = 0; i < alg.size(); ++i)
        d->index[alg.gen(i).name] = i;
    d->delta.assign(alg.size(), {});
    for (auto& [i, e] : deltas) {
        if (!e.algebra().compatible(alg))
            throw Error("differential expression over wrong algebra");
        d->delta[i] = e.terms();
    }
    return Algebra(d);
}

// ---- derivations ----

namespace detail {

// Odd derivation walk: walks each term, replacing one symbol occurrence by
// `image(symbol key)`; the derivation has odd parity (degree +1 operators).
template <typename ImageFn>
Expr odd_derivation(const Expr& x, ImageFn&& image) {
    const Algebra& alg = x.algebra();
    Expr out(alg);
    for (auto& [w, c] : x.terms()) {
        int prefix_parity = 0;
        for (size_t k = 0; k < w.size(); ++k) {
            auto [key, exp] = w[k];
            Expr img = image(key); // Expr for the symbol's image (may be zero)
            if (!img.is_zero()) {
                // prefix word
                Expr piece = Expr::constant(alg, prefix_parity ? Rational(-1) : Rational(1));
                Word prefix(w.begin(), w.begin() + k);
                piece = piece * Expr::from_terms(alg, {{prefix, 1}});
                // e * s^{e-1} * image  (odd symbols have e = 1)
                Word mid;
                if (exp - 1 != 0)
                    mid.push_back({key, exp - 1});
                piece = piece * Expr::from_terms(alg, {{mid, Rational(exp)}});
                piece = piece * img;
                Word suffix(w.begin() + k + 1, w.end());
                piece = piece * Expr::from_terms(alg, {{suffix, 1}});
                out = out + piece * c;
            }
            prefix_parity = (prefix_parity + alg.parity_of_key(key) * (std::abs(exp) % 2)) % 2;
        }
    }
    return out;
}

} // namespace detail

/// de Rham differential: g -> dd(g), dd(g) -> 0. Input must carry no pd symbols.
inline Expr de_rham_d(const Expr& x) {
    const Algebra& alg = x.algebra();
    if (x.has_kind(SymKind::Vec))
        throw Error("de_rham_d: input carries vector symbols");
    return detail::odd_derivation(x, [&](int key) {
        if (sym_kind(key) == SymKind::Gen)
            return Expr::symbol(alg, SymKind::Form, sym_gen(key));
        return Expr(alg);
    });
}

/// Differential delta on elements and forms. On form symbols delta(dd g) =
/// -d(delta g), the extension making (d + delta)^2 = 0 on the total complex.
inline Expr apply_delta(const Expr& x) {
    const Algebra& alg = x.algebra();
    if (x.has_kind(SymKind::Vec))
        throw Error("apply_delta: vector symbols need the bracket with the delta polyvector");
    return detail::odd_derivation(x, [&](int key) {
        int g = sym_gen(key);
        Expr dg = Expr::from_terms(alg, alg.delta_of(g));
        if (sym_kind(key) == SymKind::Gen)
            return dg;
        return -de_rham_d(dg);
    });
}

/// Total de Rham differential d + delta.
inline Expr total_de_rham_d(const Expr& x) { return de_rham_d(x) + apply_delta(x); }

// ---- checks ----

struct CheckItem {
    std::string name;
    bool pass = true;
    std::string witness; // empty when pass
};

struct Report {
    std::vector<CheckItem> items;
    bool ok() const {
        for (auto& i : items)
            if (!i.pass)
                return false;
        return true;
    }
    void add(const std::string& name, bool pass, const std::string& witness = "") {
        items.push_back({name, pass, pass ? std::string() : witness});
    }
};

std::string to_string(const Expr& e); // parse.hpp

/// Confirms delta degrees, delta^2 = 0 generator-wise, invertibility constraints.
inline Report verify_cdga(const Algebra& alg) {
    Report rep;
    for (int i = 0; i < alg.size(); ++i) {
        const auto& g = alg.gen(i);
        if (g.invertible && g.degree != 0)
            rep.add("invertible degree", false, g.name);
        Expr dg = Expr::from_terms(alg, alg.delta_of(i));
        auto d = dg.total_degree();
        if (!dg.is_zero() && (!d || *d != g.degree + 1))
            rep.add("delta raises degree by 1", false, g.name + " -> " + to_string(dg));
        if (dg.has_kind(SymKind::Form) || dg.has_kind(SymKind::Vec))
            rep.add("delta lands in the algebra", false, g.name);
        Expr dd = apply_delta(dg);
        if (!dd.is_zero())
            rep.add("delta squared is zero", false, g.name + ": " + to_string(dd));
    }
    if (rep.items.empty())
        rep.add("cdga", true);
    return rep;
}

} // namespace qpol
