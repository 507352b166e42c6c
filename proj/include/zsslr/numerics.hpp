#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "zsslr/errors.hpp"
#include "zsslr/matrix.hpp"

namespace zsslr {

namespace detail {

inline void require_symmetric(const Matrix& a, double rel_tol) {
    const double scale = std::max(1.0, max_abs(a));
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > rel_tol * scale)
                throw numeric_error("solve_spd: matrix is not symmetric");
}

}  // namespace detail

/// Solve A·X = B for symmetric positive-definite A via Cholesky. A failed
/// pivot usually means an unregularized Gram matrix; the caller should raise
/// its ridge term (gamma or lambda).
inline Matrix solve_spd(const Matrix& a, const Matrix& b) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw config_error("solve_spd: matrix must be square");
    if (b.rows() != n) throw config_error("solve_spd: right-hand side has wrong row count");
    detail::require_symmetric(a, 1e-10);

    // Lower-triangular factor, in place over a copy. Pivots are measured
    // against the matrix scale so a rank-deficient Gram matrix whose zero
    // pivot lands on roundoff noise is still caught.
    Matrix l = a;
    const double pivot_tol = 1e-12 * max_abs(a);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = l(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (diag <= pivot_tol)
            throw numeric_error(
                "solve_spd: non-positive pivot, matrix is not positive definite "
                "(raise the regularizer gamma or lambda)");
        const double root = std::sqrt(diag);
        l(j, j) = root;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = l(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / root;
        }
    }

    Matrix x = b;
    const std::size_t rhs = b.cols();
    // L·Y = B
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < rhs; ++c) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    }
    // L^T·X = Y
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t c = 0; c < rhs; ++c) {
            double s = x(i, c);
            for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    }
    return x;
}

/// Solve A·X = B by LU with partial pivoting. General square systems.
inline Matrix solve_lu(Matrix a, Matrix b) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw config_error("solve_lu: matrix must be square");
    if (b.rows() != n) throw config_error("solve_lu: right-hand side has wrong row count");
    const double singular_tol = 1e-13 * std::max(1.0, max_abs(a));

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (std::abs(a(piv, col)) <= singular_tol)
            throw numeric_error("solve_lu: matrix is singular to working precision");
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
            for (std::size_t j = 0; j < b.cols(); ++j) std::swap(b(col, j), b(piv, j));
        }
        const double pivot = a(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / pivot;
            if (f == 0.0) continue;
            a(r, col) = 0.0;
            for (std::size_t j = col + 1; j < n; ++j) a(r, j) -= f * a(col, j);
            for (std::size_t j = 0; j < b.cols(); ++j) b(r, j) -= f * b(col, j);
        }
    }
    Matrix x(n, b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t i = n; i-- > 0;) {
            double s = b(i, c);
            for (std::size_t k = i + 1; k < n; ++k) s -= a(i, k) * x(k, c);
            x(i, c) = s / a(i, i);
        }
    }
    return x;
}

/// Solve A·W + W·B = C by Kronecker vectorization and a dense LU solve.
/// Solvable iff the spectra of A and -B are disjoint; a singular assembled
/// system is reported, never returned. Sized for desk-scale problems.
inline Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& c) {
    const std::size_t m = a.rows(), n = b.rows();
    if (a.cols() != m || b.cols() != n) throw config_error("solve_sylvester: A and B must be square");
    if (c.rows() != m || c.cols() != n)
        throw config_error("solve_sylvester: C must be A.rows x B.rows");
    const std::size_t unknowns = m * n;
    if (unknowns > 1024)
        throw numeric_error("solve_sylvester: more than 1024 unknowns, system too large "
                            "for the dense Kronecker route");

    // (I_n (x) A + B^T (x) I_m) vec(W) = vec(C), column-major vec.
    Matrix big(unknowns, unknowns);
    Matrix rhs(unknowns, 1);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t row = j * m + i;
            for (std::size_t k = 0; k < m; ++k) big(row, j * m + k) += a(i, k);
            for (std::size_t l = 0; l < n; ++l) big(row, l * m + i) += b(l, j);
            rhs(row, 0) = c(i, j);
        }
    }
    Matrix flat;
    try {
        flat = solve_lu(std::move(big), std::move(rhs));
    } catch (const numeric_error&) {
        throw numeric_error("solve_sylvester: singular system (spectra of A and -B overlap)");
    }
    Matrix w(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) w(i, j) = flat(j * m + i, 0);
    return w;
}

/// Numerically stable softmax (max subtraction).
inline Vector softmax(const Vector& v) {
    if (v.empty()) throw config_error("softmax: empty input");
    double hi = v[0];
    for (double x : v) {
        if (!std::isfinite(x)) throw numeric_error("softmax: non-finite input");
        hi = std::max(hi, x);
    }
    Vector p(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        p[i] = std::exp(v[i] - hi);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

inline Vector l2_normalize(const Vector& v) {
    const double n = norm2(v);
    if (n == 0.0) throw numeric_error("l2_normalize: zero vector");
    if (!std::isfinite(n)) throw numeric_error("l2_normalize: non-finite input");
    Vector out(v);
    for (double& x : out) x /= n;
    return out;
}

}  // namespace zsslr
