#pragma once

#include "qpol/linalg.hpp"
#include "qpol/polyvector.hpp"

#include <functional>
#include <map>
#include <set>
#include <vector>

namespace qpol {

// Flat right connection: nabla_2 given on basis vectors pd(g) and extended by
// nabla_2(a xi) = a nabla_2(xi) - xi(da); nabla_k for k >= 3 given A-linearly
// on basis words of weight k-1 (absent word = 0). A closed twisting form in
// F^1 may be attached; it contributes u -| alpha to the operator D.
struct RightConnection {
    Algebra alg;
    std::map<int, Element> nabla2;
    std::map<Word, Element> higher; // vec word of weight k-1 -> value, k >= 3
    DeRhamForm alpha;

    bool has_higher() const { return !higher.empty(); }
};

namespace detail {

// all multisets of `kind` symbols of total weight w drawn from the generator set
inline void enumerate_words(const Algebra& alg, SymKind kind, int w, int from, Word& cur,
                            std::vector<Word>& out) {
    if (w == 0) {
        out.push_back(cur);
        return;
    }
    for (int g = from; g < alg.size(); ++g) {
        int key = sym_key(kind, g);
        int cap = alg.parity_of_key(key) ? 1 : w;
        for (int e = 1; e <= cap; ++e) {
            cur.push_back({key, e});
            enumerate_words(alg, kind, w - e, g + 1, cur, out);
            cur.pop_back();
        }
    }
}

inline std::vector<Word> basis_words(const Algebra& alg, SymKind kind, int weight) {
    std::vector<Word> out;
    Word cur;
    enumerate_words(alg, kind, weight, 0, cur, out);
    return out;
}

} // namespace detail

/// The insertion pieces of D (the twist by alpha and the A-linear higher
/// tables) enter dressed by the parity involution: (-1)^{|u|+1} u -| beta per
/// term. The dressing is what makes them anticommute correctly inside
/// D after D; the sign on even terms is pinned by the twist example that
/// cancels a first-order obstruction.
inline Polyvector dressed_contract(const Polyvector& u, const DeRhamForm& beta) {
    const Algebra& alg = u.algebra().valid() ? u.algebra() : beta.algebra();
    Expr out(alg);
    for (auto& [w, c] : u.terms()) {
        Expr piece = contract(Expr::from_terms(alg, {{w, c}}), beta);
        out = u.word_parity(w) ? out + piece : out - piece;
    }
    return out;
}

namespace detail {

// order-two part of D: the operator generating the Schouten bracket over the
// nabla_2 table, defined by D2(a) = 0, and recursively
//   D2(P s) = D2(P) s + (-1)^{|P|} P nabla2(s) + [P, s]
// peeling the rightmost vector symbol s. On a zero table this reproduces the
// divergence-style extension nabla(a pd(g)) = -(da/dg) on even coefficients.
inline Polyvector apply_D2_term(const RightConnection& conn, const Word& w, const Rational& c) {
    const Algebra& alg = conn.alg;
    int vw = Expr::word_weight(w, SymKind::Vec);
    if (vw == 0)
        return Expr(alg);
    Word P = w;
    int s = 0;
    for (int i = static_cast<int>(P.size()) - 1; i >= 0; --i) {
        if (sym_kind(P[i].first) == SymKind::Vec) {
            s = P[i].first;
            if (--P[i].second == 0)
                P.erase(P.begin() + i);
            break;
        }
    }
    int pP = 0;
    for (auto& [k, e] : P)
        pP = (pP + alg.parity_of_key(k) * (std::abs(e) % 2)) % 2;
    Expr Pterm = Expr::from_terms(alg, {{P, c}});
    Expr svec = Expr::from_terms(alg, {{{{s, 1}}, 1}});
    Expr out = apply_D2_term(conn, P, c) * svec;
    auto it = conn.nabla2.find(sym_gen(s));
    if (it != conn.nabla2.end() && !it->second.is_zero()) {
        Expr t = Pterm * it->second;
        out = pP ? out - t : out + t;
    }
    out = out + schouten(Pterm, svec);
    return out;
}

inline Polyvector apply_D2(const RightConnection& conn, const Polyvector& u) {
    Expr out(conn.alg);
    for (auto& [w, c] : u.terms())
        out = out + apply_D2_term(conn, w, c);
    return out;
}

// order-k piece from the A-linear table, k >= 3: sum over table words V of
// T(V) . dressed insertion of the dual form of V, normalised by <V, B_V>.
inline Polyvector apply_D_higher(const RightConnection& conn, int k, const Polyvector& u) {
    const Algebra& alg = conn.alg;
    Expr out(alg);
    for (auto& [V, T] : conn.higher) {
        if (T.is_zero() || Expr::word_weight(V, SymKind::Vec) != k - 1)
            continue;
        Word BV;
        for (auto& [key, exp] : V)
            BV.push_back({sym_key(SymKind::Form, sym_gen(key)), exp});
        DeRhamForm B = Expr::from_terms(alg, {{BV, 1}});
        Element kappa = evaluate_on_form(Expr::from_terms(alg, {{V, 1}}), B);
        if (kappa.term_count() != 1 || !kappa.terms().begin()->first.empty())
            throw Error("apply_D_higher: bad dual pairing");
        Expr piece = dressed_contract(u, B);
        if (!piece.is_zero())
            out = out + T * piece * (Rational(1) / kappa.terms().begin()->second);
    }
    return out;
}

} // namespace detail

/// The order-k piece of the operator D: k = 1 is the differential, k = 2 the
/// bracket-generating extension of nabla_2, k >= 3 the A-linear tables; each
/// k >= 2 piece also carries the weight-(k-1) component of the twist.
inline Polyvector apply_D_k(const RightConnection& conn, int k, const Polyvector& u) {
    const Algebra& alg = conn.alg;
    if (k == 1)
        return apply_delta_poly(u);
    Expr out(alg);
    if (k == 2)
        out = out + detail::apply_D2(conn, u);
    else
        out = out + detail::apply_D_higher(conn, k, u);
    if (!conn.alpha.is_zero()) {
        Expr ak = conn.alpha.component(SymKind::Form, k - 1);
        if (!ak.is_zero())
            out = out + dressed_contract(u, ak);
    }
    return out;
}

/// D = sum_k D_k on a polyvector (any weight mixture).
inline Polyvector apply_D(const RightConnection& conn, const Polyvector& u) {
    Expr out = apply_delta_poly(u) + detail::apply_D2(conn, u);
    std::set<int> orders;
    for (auto& [w, v] : conn.higher)
        orders.insert(Expr::word_weight(w, SymKind::Vec) + 1);
    for (int k : orders)
        out = out + detail::apply_D_higher(conn, k, u);
    if (!conn.alpha.is_zero())
        out = out + dressed_contract(u, conn.alpha);
    return out;
}

namespace detail {

inline std::vector<Element> bounded_monomials(const Algebra& alg, int degree_bound) {
    std::vector<Element> out;
    Word cur;
    std::function<void(int, int)> rec = [&](int g, int budget) {
        if (g == alg.size()) {
            out.push_back(Expr::from_terms(alg, {{cur, 1}}));
            return;
        }
        const auto& spec = alg.gen(g);
        int lo = spec.invertible ? -budget : 0;
        int hi = spec.degree % 2 != 0 ? 1 : budget;
        for (int e = lo; e <= hi; ++e) {
            int cost = std::abs(e);
            if (cost > budget)
                continue;
            if (e != 0)
                cur.push_back({sym_key(SymKind::Gen, g), e});
            rec(g + 1, budget - cost);
            if (e != 0)
                cur.pop_back();
        }
    };
    rec(0, degree_bound);
    return out;
}

} // namespace detail

/// Entry degrees plus D after D = 0 on a spanning set of coefficiented basis
/// polyvectors up to the given weight and monomial-size bounds.
inline Report flatness_check(const RightConnection& conn, int weight_bound, int degree_bound) {
    Report rep;
    const Algebra& alg = conn.alg;
    for (auto& [g, v] : conn.nabla2) {
        if (v.is_zero())
            continue;
        auto d = v.total_degree();
        if (!d || *d != -alg.gen(g).degree)
            rep.add("nabla2 degree", false,
                    "nabla2(pd(" + alg.gen(g).name + ")) = " + to_string(v));
    }
    for (auto& [w, v] : conn.higher) {
        if (v.is_zero())
            continue;
        Polyvector word = Expr::from_terms(alg, {{w, 1}});
        auto d = v.total_degree();
        auto pd = word.total_degree(); // DR^r degree of the basis word
        if (!d || !pd || *d != *pd + 1)
            rep.add("higher nabla degree", false, to_string(word) + " -> " + to_string(v));
    }
    if (!conn.alpha.is_zero()) {
        if (!total_de_rham_d(conn.alpha).is_zero())
            rep.add("twist closed", false, to_string(conn.alpha));
        if (!conn.alpha.component(SymKind::Form, 0).is_zero())
            rep.add("twist in F^1", false, to_string(conn.alpha));
    }
    auto monomials = detail::bounded_monomials(alg, degree_bound);
    for (int w = 0; w <= weight_bound; ++w) {
        for (const Word& vw : detail::basis_words(alg, SymKind::Vec, w)) {
            Polyvector base = Expr::from_terms(alg, {{vw, 1}});
            for (const Element& m : monomials) {
                Polyvector u = m * base;
                if (u.is_zero())
                    continue;
                Polyvector dd = apply_D(conn, apply_D(conn, u));
                if (!dd.is_zero()) {
                    rep.add("D after D", false,
                            "on " + to_string(u) + ": " + to_string(dd));
                    if (rep.items.size() > 16)
                        return rep; // enough witnesses
                }
            }
        }
    }
    if (rep.items.empty())
        rep.add("flat", true);
    return rep;
}

using PolyOp = std::function<Polyvector(const Polyvector&)>;

/// Iterated graded commutator [...[op, a_1], ..., a_k](1).
inline Polyvector linfty_bracket_op(const PolyOp& op, int op_parity,
                                    const std::vector<Polyvector>& args, const Algebra& alg) {
    PolyOp cur = op;
    int par = op_parity;
    for (const Polyvector& a : args) {
        // arguments must have uniform Koszul parity
        int pa = -1;
        for (auto& [w, c] : a.terms()) {
            int p = a.word_parity(w);
            if (pa < 0)
                pa = p;
            else if (pa != p)
                throw Error("linfty_bracket: argument parity is not homogeneous");
        }
        if (pa < 0)
            pa = 0;
        PolyOp prev = cur;
        int sign = (par * pa) % 2 ? -1 : 1;
        Polyvector acopy = a;
        cur = [prev, acopy, sign](const Polyvector& u) {
            Polyvector lhs = prev(acopy * u);
            Polyvector rhs = acopy * prev(u);
            return sign < 0 ? lhs + rhs : lhs - rhs;
        };
        par = (par + pa) % 2;
    }
    return cur(Expr::constant(alg, 1));
}

/// [a_1, ..., a_k] built from the full operator D.
inline Polyvector linfty_bracket(const RightConnection& conn, const std::vector<Polyvector>& args) {
    if (args.empty())
        throw Error("linfty_bracket: needs at least one argument");
    return linfty_bracket_op([&conn](const Polyvector& u) { return apply_D(conn, u); }, 1, args,
                             conn.alg);
}

/// [a_1, ..., a_k] built from the order-k piece of D alone.
inline Polyvector linfty_bracket_piece(const RightConnection& conn, int k,
                                       const std::vector<Polyvector>& args) {
    return linfty_bracket_op([&conn, k](const Polyvector& u) { return apply_D_k(conn, k, u); }, 1,
                             args, conn.alg);
}

/// Twist by a closed element of F^1: D becomes D + (-| alpha).
inline RightConnection twist(const RightConnection& conn, const DeRhamForm& alpha) {
    if (alpha.has_kind(SymKind::Vec))
        throw Error("twist: alpha is not a de Rham form");
    if (!alpha.component(SymKind::Form, 0).is_zero())
        throw Error("twist: alpha must lie in F^1");
    if (auto d = alpha.total_degree(); !alpha.is_zero() && (!d || *d != 1))
        throw Error("twist: alpha must have total degree 1");
    if (!total_de_rham_d(alpha).is_zero())
        throw Error("twist: alpha is not closed");
    RightConnection out = conn;
    out.alpha = conn.alpha + alpha;
    return out;
}

/// The connection determined by a strictly nondegenerate strict Poisson
/// structure: nabla(v) = d((pi^flat)^{-1} v) -| pi on basis vectors.
struct CanonicalConnectionResult {
    RightConnection connection;
    Report report; // degeneracy rejection, or whether D(pi) = 0
};

inline CanonicalConnectionResult canonical_connection(const PoissonStructure& pi) {
    CanonicalConnectionResult res;
    if (!pi.strict)
        throw Error("canonical_connection: Poisson structure must be strict");
    NondegCertificate cert = nondegeneracy_check(pi);
    if (!cert.nondegenerate)
        throw Error("canonical_connection: degenerate structure: " + cert.witness);
    const Polyvector& pi2 = pi.components.at(2);
    const Algebra& alg = pi2.algebra();
    res.connection.alg = alg;
    // candidate monomial support for (pi^flat)^{-1}, read off the inverse matrix
    std::set<Word> support;
    support.insert({});
    for (auto& row : cert.inverse)
        for (auto& e : row)
            for (auto& [w, c] : e.terms())
                support.insert(w);
    // unknowns: lambda_{g, m} with nu_h = sum lambda m dd(g)
    std::vector<std::pair<int, Word>> unknowns;
    for (int g = 0; g < alg.size(); ++g)
        for (auto& w : support)
            unknowns.push_back({g, w});
    // precompute contraction of each candidate against pi2
    std::vector<Polyvector> images;
    for (auto& [g, w] : unknowns) {
        DeRhamForm cand = Expr::from_terms(alg, {{w, 1}}) * Expr::symbol(alg, SymKind::Form, g);
        images.push_back(contract(pi2, cand));
    }
    // shared coordinate space for weight-1 polyvectors
    std::map<Word, int> coord;
    auto coords_of = [&](const Polyvector& v) {
        for (auto& [w, c] : v.terms())
            if (!coord.count(w))
                coord[w] = static_cast<int>(coord.size());
    };
    for (auto& im : images)
        coords_of(im);
    for (int h = 0; h < alg.size(); ++h)
        coords_of(Expr::symbol(alg, SymKind::Vec, h));
    for (int h = 0; h < alg.size(); ++h) {
        Polyvector target = Expr::symbol(alg, SymKind::Vec, h);
        QMatrix A(coord.size(), QVector(unknowns.size(), Rational(0)));
        QVector b(coord.size(), Rational(0));
        for (size_t u = 0; u < unknowns.size(); ++u)
            for (auto& [w, c] : images[u].terms())
                A[coord[w]][u] = c;
        for (auto& [w, c] : target.terms())
            b[coord[w]] = c;
        auto sol = linalg::solve(A, b);
        if (!sol)
            throw Error("canonical_connection: could not invert pi^flat on pd(" +
                        alg.gen(h).name + ")");
        DeRhamForm nu(alg);
        for (size_t u = 0; u < unknowns.size(); ++u) {
            if ((*sol)[u] == 0)
                continue;
            nu = nu + (*sol)[u] * (Expr::from_terms(alg, {{unknowns[u].second, 1}}) *
                                   Expr::symbol(alg, SymKind::Form, unknowns[u].first));
        }
        if (contract(pi2, nu) != target)
            throw Error("canonical_connection: inverse verification failed");
        Element val = contract(pi2, de_rham_d(nu));
        if (!val.is_zero())
            res.connection.nabla2[h] = val;
    }
    Polyvector dpi = apply_D(res.connection, pi.total());
    res.report.add("D(pi) = 0", dpi.is_zero(), dpi.is_zero() ? "" : to_string(dpi));
    return res;
}

} // namespace qpol
