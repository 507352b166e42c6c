#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "zsslr/errors.hpp"

namespace zsslr {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. The value-constructing overloads check
/// that every entry is finite; element writes through operator() are unchecked.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), v_(rows * cols, 0.0) {}

    Matrix(std::size_t rows, std::size_t cols, Vector values)
        : rows_(rows), cols_(cols), v_(std::move(values)) {
        if (v_.size() != rows_ * cols_)
            throw config_error("matrix value count does not match rows*cols");
        for (double x : v_)
            if (!std::isfinite(x)) throw config_error("matrix entry is not finite");
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows_init) {
        rows_ = rows_init.size();
        cols_ = rows_ == 0 ? 0 : rows_init.begin()->size();
        v_.reserve(rows_ * cols_);
        for (const auto& r : rows_init) {
            if (r.size() != cols_) throw config_error("ragged matrix initializer");
            for (double x : r) {
                if (!std::isfinite(x)) throw config_error("matrix entry is not finite");
                v_.push_back(x);
            }
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double& operator()(std::size_t i, std::size_t j) {
        assert(i < rows_ && j < cols_);
        return v_[i * cols_ + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        assert(i < rows_ && j < cols_);
        return v_[i * cols_ + j];
    }

    std::span<double> row(std::size_t i) {
        assert(i < rows_);
        return {v_.data() + i * cols_, cols_};
    }
    std::span<const double> row(std::size_t i) const {
        assert(i < rows_);
        return {v_.data() + i * cols_, cols_};
    }

    Vector& values() { return v_; }
    const Vector& values() const { return v_; }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    Vector v_;
};

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw config_error("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const auto brow = b.row(k);
            auto crow = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

/// a * b^T without materializing the transpose.
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw config_error("matmul_bt: inner dimensions differ");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto arow = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto brow = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
            c(i, j) = s;
        }
    }
    return c;
}

/// A·v
inline Vector matvec(const Matrix& a, const Vector& v) {
    if (a.cols() != v.size()) throw config_error("matvec: dimensions differ");
    Vector out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto arow = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += arow[j] * v[j];
        out[i] = s;
    }
    return out;
}

/// A^T·v, i.e. (v^T A)^T
inline Vector matvec_t(const Matrix& a, const Vector& v) {
    if (a.rows() != v.size()) throw config_error("matvec_t: dimensions differ");
    Vector out(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double vi = v[i];
        if (vi == 0.0) continue;
        const auto arow = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] += vi * arow[j];
    }
    return out;
}

/// a += s·u v^T
inline void add_outer(Matrix& a, const Vector& u, const Vector& v, double s = 1.0) {
    assert(a.rows() == u.size() && a.cols() == v.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double su = s * u[i];
        if (su == 0.0) continue;
        auto arow = a.row(i);
        for (std::size_t j = 0; j < v.size(); ++j) arow[j] += su * v[j];
    }
}

inline void add_scaled(Matrix& a, const Matrix& b, double s) {
    assert(a.rows() == b.rows() && a.cols() == b.cols());
    for (std::size_t i = 0; i < a.values().size(); ++i) a.values()[i] += s * b.values()[i];
}

inline void add_scaled(Vector& a, const Vector& b, double s) {
    assert(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

inline void scale(Matrix& a, double s) {
    for (double& x : a.values()) x *= s;
}

inline double dot(const Vector& a, const Vector& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

inline double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double x : a.values()) s += x * x;
    return std::sqrt(s);
}

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double x : a.values()) m = std::max(m, std::abs(x));
    return m;
}

inline double max_abs(const Vector& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline Vector concat(const Vector& a, const Vector& b) {
    Vector out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace zsslr
