#pragma once

#include "qpol/algebra.hpp"
#include "qpol/parse.hpp"

#include <functional>
#include <map>
#include <vector>

namespace qpol {

namespace detail {

inline void split_word(const Word& w, Word& gens, std::vector<int>& forms,
                       std::vector<int>& vecs) {
    gens.clear();
    forms.clear();
    vecs.clear();
    for (auto& [key, exp] : w) {
        switch (sym_kind(key)) {
        case SymKind::Gen: gens.push_back({key, exp}); break;
        case SymKind::Form:
            for (int i = 0; i < exp; ++i)
                forms.push_back(key);
            break;
        case SymKind::Vec:
            for (int i = 0; i < exp; ++i)
                vecs.push_back(key);
            break;
        }
    }
}

inline Word word_of_symbols(const std::vector<int>& syms) {
    Word w;
    for (int k : syms) {
        if (!w.empty() && w.back().first == k)
            ++w.back().second;
        else
            w.push_back({k, 1});
    }
    return w;
}

// Insert the form symbols of F (canonical order, leftmost first) into the
// vector word V; each single symbol enters from the left. Accumulates the
// resulting vector words into `out`.
inline void contract_core(const Algebra& alg, std::vector<int> V, const std::vector<int>& F,
                          size_t fpos, const Rational& coef, TermMap& out) {
    if (fpos == F.size()) {
        if (coef == 0)
            return;
        Word w = word_of_symbols(V);
        auto it = out.find(w);
        if (it == out.end())
            out[w] = coef;
        else {
            it->second += coef;
            if (it->second == 0)
                out.erase(it);
        }
        return;
    }
    int beta = F[fpos];
    int pb = alg.parity_of_key(beta);
    int prefix = 0;
    for (size_t k = 0; k < V.size(); ++k) {
        if (sym_gen(V[k]) == sym_gen(beta)) {
            std::vector<int> rest;
            rest.reserve(V.size() - 1);
            for (size_t l = 0; l < V.size(); ++l)
                if (l != k)
                    rest.push_back(V[l]);
            Rational c = coef;
            if (pb && prefix)
                c = -c;
            contract_core(alg, std::move(rest), F, fpos + 1, c, out);
        }
        prefix = (prefix + alg.parity_of_key(V[k])) % 2;
    }
}

// Insert the vector symbols of V (rightmost first) into the form word F; each
// single symbol contracts form slots from the right.
inline void insert_core(const Algebra& alg, const std::vector<int>& V, size_t vpos,
                        std::vector<int> F, const Rational& coef, TermMap& out) {
    if (vpos == 0) {
        if (coef == 0)
            return;
        Word w = word_of_symbols(F);
        auto it = out.find(w);
        if (it == out.end())
            out[w] = coef;
        else {
            it->second += coef;
            if (it->second == 0)
                out.erase(it);
        }
        return;
    }
    int s = V[vpos - 1];
    int ps = alg.parity_of_key(s);
    // suffix parities of F
    std::vector<int> suffix(F.size() + 1, 0);
    for (int i = static_cast<int>(F.size()) - 1; i >= 0; --i)
        suffix[i] = (suffix[i + 1] + alg.parity_of_key(F[i])) % 2;
    for (size_t k = 0; k < F.size(); ++k) {
        if (sym_gen(F[k]) == sym_gen(s)) {
            std::vector<int> rest;
            rest.reserve(F.size() - 1);
            for (size_t l = 0; l < F.size(); ++l)
                if (l != k)
                    rest.push_back(F[l]);
            Rational c = coef;
            if (ps && suffix[k + 1])
                c = -c;
            insert_core(alg, V, vpos - 1, std::move(rest), c, out);
        }
    }
}

} // namespace detail

/// Insertion of a form into a polyvector: u -| omega. Consumes every form
/// symbol of omega; the vector weight drops by the Hodge weight of omega.
inline Polyvector contract(const Polyvector& u, const DeRhamForm& omega) {
    const Algebra& alg = u.algebra().valid() ? u.algebra() : omega.algebra();
    if (u.has_kind(SymKind::Form))
        throw Error("contract: polyvector carries form symbols");
    if (omega.has_kind(SymKind::Vec))
        throw Error("contract: form carries vector symbols");
    Expr result(alg);
    Word gu;
    std::vector<int> fu, vu;
    for (auto& [wu, cu] : u.terms()) {
        detail::split_word(wu, gu, fu, vu);
        for (auto& [wo, co] : omega.terms()) {
            Word gens_o;
            std::vector<int> forms_o, vecs_o;
            detail::split_word(wo, gens_o, forms_o, vecs_o);
            if (forms_o.size() > vu.size())
                continue;
            // coefficient of omega moves left past the vector word of u
            int sign = 1;
            {
                int pm = 0;
                for (auto& [k, e] : gens_o)
                    pm = (pm + alg.parity_of_key(k) * (std::abs(e) % 2)) % 2;
                int pv = 0;
                for (int k : vu)
                    pv = (pv + alg.parity_of_key(k)) % 2;
                if (pm && pv)
                    sign = -sign;
            }
            TermMap core;
            detail::contract_core(alg, vu, forms_o, 0, cu * co * sign, core);
            if (core.empty())
                continue;
            Expr coeff = Expr::from_terms(alg, {{gu, 1}}) * Expr::from_terms(alg, {{gens_o, 1}});
            result = result + coeff * Expr::from_terms(alg, std::move(core));
        }
    }
    return result;
}

/// Insertion of a polyvector into a form: i_u(omega). Consumes every vector
/// symbol of u; the Hodge weight drops by the vector weight of u.
inline DeRhamForm insert_into_form(const Polyvector& u, const DeRhamForm& omega) {
    const Algebra& alg = u.algebra().valid() ? u.algebra() : omega.algebra();
    if (u.has_kind(SymKind::Form))
        throw Error("insert_into_form: polyvector carries form symbols");
    if (omega.has_kind(SymKind::Vec))
        throw Error("insert_into_form: form carries vector symbols");
    Expr result(alg);
    for (auto& [wu, cu] : u.terms()) {
        Word gu;
        std::vector<int> forms_u, vu;
        detail::split_word(wu, gu, forms_u, vu);
        for (auto& [wo, co] : omega.terms()) {
            Word go;
            std::vector<int> fo, vecs_o;
            detail::split_word(wo, go, fo, vecs_o);
            if (vu.size() > fo.size())
                continue;
            int sign = 1;
            {
                int pm = 0;
                for (auto& [k, e] : go)
                    pm = (pm + alg.parity_of_key(k) * (std::abs(e) % 2)) % 2;
                int pv = 0;
                for (int k : vu)
                    pv = (pv + alg.parity_of_key(k)) % 2;
                if (pm && pv)
                    sign = -sign;
            }
            TermMap core;
            detail::insert_core(alg, vu, vu.size(), fo, cu * co * sign, core);
            if (core.empty())
                continue;
            Expr coeff = Expr::from_terms(alg, {{gu, 1}}) * Expr::from_terms(alg, {{go, 1}});
            result = result + coeff * Expr::from_terms(alg, std::move(core));
        }
    }
    return result;
}

/// Koszul-signed pairing of a weight-p polyvector with a weight-p form.
inline Element evaluate_on_form(const Polyvector& u, const DeRhamForm& omega) {
    auto wu = u.weight(SymKind::Vec), wo = omega.weight(SymKind::Form);
    if (!u.is_zero() && !omega.is_zero() && (!wu || !wo || *wu != *wo))
        throw Error("evaluate_on_form: weight mismatch");
    return contract(u, omega);
}

// ---- Schouten--Nijenhuis bracket ----

namespace detail {

Expr bracket_terms(const Algebra& alg, const Word& wu, const Rational& cu, const Word& wv,
                   const Rational& cv);

inline Expr bracket_symbol_term(const Algebra& alg, int s, const Word& wv, const Rational& cv) {
    // [s, c*T] = (s -| d c) * T   for a single vector symbol s
    Word gens;
    std::vector<int> forms, vecs;
    split_word(wv, gens, forms, vecs);
    Expr c = Expr::from_terms(alg, {{gens, cv}});
    Expr sv = Expr::from_terms(alg, {{{{s, 1}}, 1}});
    Expr contracted = contract(sv, de_rham_d(c));
    if (contracted.is_zero())
        return contracted;
    return contracted * Expr::from_terms(alg, {{word_of_symbols(vecs), 1}});
}

inline Expr bracket_terms(const Algebra& alg, const Word& wu, const Rational& cu, const Word& wv,
                          const Rational& cv) {
    int pu = 0, pv = 0;
    for (auto& [k, e] : wu)
        pu = (pu + alg.parity_of_key(k) * (std::abs(e) % 2)) % 2;
    for (auto& [k, e] : wv)
        pv = (pv + alg.parity_of_key(k) * (std::abs(e) % 2)) % 2;
    int weight_u = Expr::word_weight(wu, SymKind::Vec);
    int weight_v = Expr::word_weight(wv, SymKind::Vec);
    if (weight_u == 0 && weight_v == 0)
        return Expr(alg);
    if (weight_u == 0) {
        // antisymmetry: [u,v] = -(-1)^{(|u|+1)(|v|+1)} [v,u]
        Rational s = ((pu + 1) * (pv + 1)) % 2 ? 1 : -1;
        return s * bracket_terms(alg, wv, cv, wu, cu);
    }
    // split off the last vector symbol: wu = P * s
    Word P = wu;
    int s = 0;
    for (int i = static_cast<int>(P.size()) - 1; i >= 0; --i) {
        if (sym_kind(P[i].first) == SymKind::Vec) {
            s = P[i].first;
            if (--P[i].second == 0)
                P.erase(P.begin() + i);
            break;
        }
    }
    int ps = alg.parity_of_key(s);
    Expr Pterm = Expr::from_terms(alg, {{P, cu}});
    // [P s, v] = P [s, v] + (-1)^{|s|(|v|+1)} [P, v] s
    Expr t1 = Pterm * bracket_symbol_term(alg, s, wv, cv);
    Expr t2 = bracket_terms(alg, P, cu, wv, cv) *
              Expr::from_terms(alg, {{{{s, 1}}, 1}});
    if ((ps * (pv + 1)) % 2)
        t2 = -t2;
    return t1 + t2;
}

} // namespace detail

/// Schouten--Nijenhuis bracket; weight drops by one, degree (in DR^r grading)
/// rises by one.
inline Polyvector schouten(const Polyvector& u, const Polyvector& v) {
    const Algebra& alg = u.algebra().valid() ? u.algebra() : v.algebra();
    if (u.has_kind(SymKind::Form) || v.has_kind(SymKind::Form))
        throw Error("schouten: arguments carry form symbols");
    Expr r(alg);
    for (auto& [wu, cu] : u.terms())
        for (auto& [wv, cv] : v.terms())
            r = r + detail::bracket_terms(alg, wu, cu, wv, cv);
    return r;
}

/// The derivation delta as a weight-one polyvector.
inline Polyvector delta_polyvector(const Algebra& alg) {
    Expr r(alg);
    for (int i = 0; i < alg.size(); ++i) {
        Expr dg = Expr::from_terms(alg, alg.delta_of(i));
        if (!dg.is_zero())
            r = r + dg * Expr::symbol(alg, SymKind::Vec, i);
    }
    return r;
}

/// Differential on polyvectors, [delta, -].
inline Polyvector apply_delta_poly(const Polyvector& u) {
    return schouten(delta_polyvector(u.algebra()), u);
}

// ---- Poisson structures ----

struct PoissonStructure {
    std::map<int, Polyvector> components; // weight j >= 2 -> pi_j
    bool strict = false;

    Polyvector total() const {
        Polyvector t;
        for (auto& [j, p] : components)
            t = t.algebra().valid() ? t + p : p;
        return t;
    }
    static PoissonStructure strict_from(const Polyvector& pi2) {
        PoissonStructure p;
        p.components[2] = pi2;
        p.strict = true;
        return p;
    }
    Algebra algebra() const {
        for (auto& [j, p] : components)
            if (p.algebra().valid())
                return p.algebra();
        return Algebra();
    }
};

/// Maurer--Cartan check: delta pi_j + 1/2 sum_{a+b=j+1} [pi_a, pi_b] = 0 per weight.
inline Report mc_check(const PoissonStructure& pi) {
    Report rep;
    Algebra alg = pi.algebra();
    if (!alg.valid()) {
        rep.add("maurer-cartan", true);
        return rep;
    }
    for (auto& [j, p] : pi.components) {
        if (auto w = p.weight(SymKind::Vec); !p.is_zero() && (!w || *w != j))
            rep.add("component weight", false,
                    "pi_" + std::to_string(j) + " is not weight-homogeneous of weight " +
                        std::to_string(j));
        if (auto d = p.total_degree(); !p.is_zero() && (!d || *d + j != 2))
            rep.add("component degree", false,
                    "pi_" + std::to_string(j) + " does not have total polyvector degree 2");
    }
    int jmax = pi.components.empty() ? 1 : pi.components.rbegin()->first;
    for (int j = 2; j <= 2 * jmax; ++j) {
        Expr residual(alg);
        if (auto it = pi.components.find(j); it != pi.components.end())
            residual = residual + apply_delta_poly(it->second);
        for (auto& [a, pa] : pi.components) {
            int b = j + 1 - a;
            auto itb = pi.components.find(b);
            if (itb == pi.components.end())
                continue;
            residual = residual + Rational(1, 2) * schouten(pa, itb->second);
        }
        if (!residual.is_zero())
            rep.add("mc weight " + std::to_string(j), false, to_string(residual));
    }
    if (rep.items.empty())
        rep.add("maurer-cartan", true);
    return rep;
}

// ---- nondegeneracy ----

namespace detail {

using Matrix = std::vector<std::vector<Expr>>;

inline Matrix mat_mul(const Matrix& A, const Matrix& B) {
    size_t n = A.size(), m = B[0].size(), k = B.size();
    Matrix C(n, std::vector<Expr>(m));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < m; ++j) {
            Expr s = A[i][0] * B[0][j];
            for (size_t l = 1; l < k; ++l)
                s = s + A[i][l] * B[l][j];
            C[i][j] = s;
        }
    return C;
}

inline bool mat_zero(const Matrix& A) {
    for (auto& row : A)
        for (auto& e : row)
            if (!e.is_zero())
                return false;
    return true;
}

// determinant by Laplace expansion; entries must commute (checked by caller)
inline Expr det(const Matrix& A) {
    size_t n = A.size();
    if (n == 0)
        return Expr();
    if (n == 1)
        return A[0][0];
    Expr s(A[0][0].algebra());
    for (size_t j = 0; j < n; ++j) {
        if (A[0][j].is_zero())
            continue;
        Matrix minor(n - 1, std::vector<Expr>(n - 1));
        for (size_t r = 1; r < n; ++r) {
            size_t cc = 0;
            for (size_t c = 0; c < n; ++c)
                if (c != j)
                    minor[r - 1][cc++] = A[r][c];
        }
        Expr term = A[0][j] * det(minor);
        s = (j % 2 == 0) ? s + term : s - term;
    }
    return s;
}

// a unit of the coefficient ring: +-q * monomial in invertible generators
inline bool is_unit(const Expr& e, Expr* inverse = nullptr) {
    if (e.term_count() != 1)
        return false;
    const Algebra& alg = e.algebra();
    auto& [w, c] = *e.terms().begin();
    Word inv;
    for (auto& [key, exp] : w) {
        if (sym_kind(key) != SymKind::Gen || !alg.gen(sym_gen(key)).invertible)
            return false;
        inv.push_back({key, -exp});
    }
    if (inverse)
        *inverse = Expr::from_terms(alg, {{inv, Rational(1) / c}});
    return true;
}

inline bool word_has_odd_gen(const Algebra& alg, const Word& w) {
    for (auto& [key, exp] : w)
        if (alg.parity_of_key(key))
            return true;
    return false;
}

} // namespace detail

struct NondegCertificate {
    bool nondegenerate = false;
    std::string witness;                      // why not, when degenerate
    std::vector<std::vector<Expr>> inverse;   // of the pairing matrix, when it exists
    std::vector<std::vector<Expr>> matrix;    // pairing matrix M[g][h]: pi -| dg = sum M[g][h] pd(h)
};

/// Decides strict nondegeneracy: the matrix of pi_2 pairing {dg} against
/// {pd(g)} must be invertible over A.
inline NondegCertificate nondegeneracy_check(const PoissonStructure& pi) {
    if (!pi.strict)
        throw Error("nondegeneracy_check: only strict structures are decidable here");
    NondegCertificate cert;
    auto it = pi.components.find(2);
    if (it == pi.components.end()) {
        cert.witness = "no weight-2 component";
        return cert;
    }
    const Polyvector& pi2 = it->second;
    const Algebra& alg = pi2.algebra();
    int n = alg.size();
    detail::Matrix M(n, std::vector<Expr>(n, Expr(alg)));
    for (int g = 0; g < n; ++g) {
        Polyvector row = contract(pi2, Expr::symbol(alg, SymKind::Form, g));
        for (auto& [w, c] : row.terms()) {
            Word gens;
            std::vector<int> forms, vecs;
            detail::split_word(w, gens, forms, vecs);
            if (vecs.size() != 1)
                throw Error("nondegeneracy_check: unexpected contraction weight");
            M[g][sym_gen(vecs[0])] =
                M[g][sym_gen(vecs[0])] + Expr::from_terms(alg, {{gens, c}});
        }
    }
    cert.matrix = M;
    // split into an even-generator part and a nilpotent remainder
    detail::Matrix M0(n, std::vector<Expr>(n, Expr(alg))), N(n, std::vector<Expr>(n, Expr(alg)));
    int odd_gens = 0;
    for (int i = 0; i < n; ++i)
        if (alg.gen(i).degree % 2 != 0)
            ++odd_gens;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            TermMap even, odd;
            for (auto& [w, c] : M[i][j].terms()) {
                if (detail::word_has_odd_gen(alg, w))
                    odd[w] = c;
                else
                    even[w] = c;
            }
            M0[i][j] = Expr::from_terms(alg, std::move(even));
            N[i][j] = Expr::from_terms(alg, std::move(odd));
        }
    Expr d = detail::det(M0);
    Expr dinv;
    if (!detail::is_unit(d, &dinv)) {
        cert.witness = "determinant " + to_string(d) + " is not a unit";
        return cert;
    }
    // inverse of M0 via adjugate
    detail::Matrix M0inv(n, std::vector<Expr>(n, Expr(alg)));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            detail::Matrix minor;
            for (int r = 0; r < n; ++r) {
                if (r == j)
                    continue;
                std::vector<Expr> row;
                for (int c = 0; c < n; ++c)
                    if (c != i)
                        row.push_back(M0[r][c]);
                minor.push_back(std::move(row));
            }
            Expr cof = (n == 1) ? Expr::constant(alg, 1) : detail::det(minor);
            if ((i + j) % 2)
                cof = -cof;
            M0inv[i][j] = cof * dinv;
        }
    // Neumann series against the nilpotent remainder
    detail::Matrix inv = M0inv;
    detail::Matrix P = M0inv; // running (-M0inv N)^k M0inv
    for (int k = 1; k <= odd_gens + 1; ++k) {
        detail::Matrix T = detail::mat_mul(M0inv, N);
        for (auto& row : T)
            for (auto& e : row)
                e = -e;
        P = detail::mat_mul(T, P);
        if (detail::mat_zero(P))
            break;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                inv[i][j] = inv[i][j] + P[i][j];
    }
    // exact verification
    detail::Matrix check = detail::mat_mul(M, inv);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Expr expect = (i == j) ? Expr::constant(alg, 1) : Expr(alg);
            if (check[i][j] != expect) {
                cert.witness = "inverse verification failed";
                return cert;
            }
        }
    cert.nondegenerate = true;
    cert.inverse = inv;
    return cert;
}

} // namespace qpol
