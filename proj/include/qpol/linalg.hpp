#pragma once

#include "qpol/rational.hpp"

#include <optional>
#include <vector>

namespace qpol {

using QVector = std::vector<Rational>;
using QMatrix = std::vector<QVector>; // row major

namespace linalg {

// Reduced row echelon form in place; returns pivot column per row.
inline std::vector<int> rref(QMatrix& A) {
    std::vector<int> pivots;
    if (A.empty())
        return pivots;
    size_t rows = A.size(), cols = A[0].size();
    size_t r = 0;
    for (size_t c = 0; c < cols && r < rows; ++c) {
        size_t sel = r;
        while (sel < rows && A[sel][c] == 0)
            ++sel;
        if (sel == rows)
            continue;
        std::swap(A[sel], A[r]);
        Rational inv = Rational(1) / A[r][c];
        for (size_t j = c; j < cols; ++j)
            A[r][j] *= inv;
        for (size_t i = 0; i < rows; ++i) {
            if (i == r || A[i][c] == 0)
                continue;
            Rational f = A[i][c];
            for (size_t j = c; j < cols; ++j)
                A[i][j] -= f * A[r][j];
        }
        pivots.push_back(static_cast<int>(c));
        ++r;
    }
    return pivots;
}

inline int rank(QMatrix A) { return static_cast<int>(rref(A).size()); }

// One solution of A x = b, if any (columns of A are the unknowns).
inline std::optional<QVector> solve(const QMatrix& A, const QVector& b) {
    if (A.empty())
        return b.empty() || std::all_of(b.begin(), b.end(), [](const Rational& v) { return v == 0; })
                   ? std::optional<QVector>(QVector{})
                   : std::nullopt;
    size_t rows = A.size(), cols = A[0].size();
    QMatrix M(rows, QVector(cols + 1));
    for (size_t i = 0; i < rows; ++i) {
        for (size_t j = 0; j < cols; ++j)
            M[i][j] = A[i][j];
        M[i][cols] = b[i];
    }
    auto pivots = rref(M);
    for (size_t i = 0; i < pivots.size(); ++i)
        if (pivots[i] == static_cast<int>(cols))
            return std::nullopt; // inconsistent
    QVector x(cols, Rational(0));
    for (size_t i = 0; i < pivots.size(); ++i)
        x[pivots[i]] = M[i][cols];
    return x;
}

// Basis of the null space of A.
inline std::vector<QVector> nullspace(QMatrix A) {
    if (A.empty())
        return {};
    size_t cols = A[0].size();
    auto pivots = rref(A);
    std::vector<bool> is_pivot(cols, false);
    for (int p : pivots)
        is_pivot[p] = true;
    std::vector<QVector> basis;
    for (size_t fc = 0; fc < cols; ++fc) {
        if (is_pivot[fc])
            continue;
        QVector v(cols, Rational(0));
        v[fc] = 1;
        for (size_t i = 0; i < pivots.size(); ++i)
            v[pivots[i]] = -A[i][fc];
        basis.push_back(std::move(v));
    }
    return basis;
}

} // namespace linalg
} // namespace qpol
