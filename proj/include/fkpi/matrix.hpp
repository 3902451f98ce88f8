#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "fkpi/errors.hpp"
#include "fkpi/prob.hpp"

// Dense square matrices just big enough for desk-scale state spaces, plus
// the scaling-and-squaring Pade matrix exponential used by the exact
// continuous-time flows.

namespace fkpi {

struct Matrix {
    std::size_t n = 0;
    SignedVector a;  // row-major

    Matrix() = default;
    Matrix(std::size_t dim, double fill = 0.0) : n(dim), a(dim * dim, fill) {}
    Matrix(std::size_t dim, SignedVector data) : n(dim), a(std::move(data)) {
        if (a.size() != n * n) throw DimensionMismatch("Matrix: bad storage size");
    }

    static Matrix identity(std::size_t dim) {
        Matrix m(dim);
        for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

    Matrix& operator+=(const Matrix& o) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += o.a[i];
        return *this;
    }
    Matrix& operator*=(double s) {
        for (double& x : a) x *= s;
        return *this;
    }

    double inf_norm() const {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += std::abs((*this)(i, j));
            m = std::max(m, s);
        }
        return m;
    }
};

inline Matrix matmul(const Matrix& x, const Matrix& y) {
    if (x.n != y.n) throw DimensionMismatch("matmul: size mismatch");
    Matrix r(x.n);
    for (std::size_t i = 0; i < x.n; ++i)
        for (std::size_t k = 0; k < x.n; ++k) {
            double v = x(i, k);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < x.n; ++j) r(i, j) += v * y(k, j);
        }
    return r;
}

inline SignedVector row_times(const SignedVector& v, const Matrix& m) {
    if (v.size() != m.n) throw DimensionMismatch("row_times: size mismatch");
    SignedVector out(m.n, 0.0);
    for (std::size_t i = 0; i < m.n; ++i) {
        double w = v[i];
        if (w == 0.0) continue;
        for (std::size_t j = 0; j < m.n; ++j) out[j] += w * m(i, j);
    }
    return out;
}

/// Solve A X = B in place by Gaussian elimination with partial pivoting.
inline Matrix solve(Matrix a, Matrix b) {
    const std::size_t n = a.n;
    if (b.n != n) throw DimensionMismatch("solve: size mismatch");
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (a(piv, col) == 0.0) throw Error("solve: singular matrix");
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a(col, j), a(piv, j));
                std::swap(b(col, j), b(piv, j));
            }
        }
        double d = a(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            a(col, j) /= d;
            b(col, j) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            double f = a(r, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a(r, j) -= f * a(col, j);
                b(r, j) -= f * b(col, j);
            }
        }
    }
    return b;
}

/// Matrix exponential by scaling-and-squaring with a [6/6] Pade
/// approximant. Matrices here have infinity norm of order one, so the
/// scaled argument sits deep inside the approximant's accuracy region.
inline Matrix expm(const Matrix& m) {
    static constexpr double c[7] = {1.0,       1.0 / 2.0,     5.0 / 44.0,    1.0 / 66.0,
                                    1.0 / 792, 1.0 / 15840.0, 1.0 / 665280.0};
    const std::size_t n = m.n;
    double norm = m.inf_norm();
    int s = 0;
    if (norm > 0.25) s = static_cast<int>(std::ceil(std::log2(norm / 0.25)));
    Matrix b = m;
    b *= std::ldexp(1.0, -s);

    Matrix b2 = matmul(b, b);
    Matrix b4 = matmul(b2, b2);
    Matrix b6 = matmul(b4, b2);

    // U = B (c1 I + c3 B^2 + c5 B^4), V = c0 I + c2 B^2 + c4 B^4 + c6 B^6
    Matrix u_inner = Matrix::identity(n);
    u_inner *= c[1];
    {
        Matrix t = b2;
        t *= c[3];
        u_inner += t;
        t = b4;
        t *= c[5];
        u_inner += t;
    }
    Matrix u = matmul(b, u_inner);
    Matrix v = Matrix::identity(n);
    v *= c[0];
    {
        Matrix t = b2;
        t *= c[2];
        v += t;
        t = b4;
        t *= c[4];
        v += t;
        t = b6;
        t *= c[6];
        v += t;
    }

    Matrix num = v;  // V + U
    num += u;
    Matrix den = v;  // V - U
    {
        Matrix nu = u;
        nu *= -1.0;
        den += nu;
    }
    Matrix r = solve(den, num);
    for (int i = 0; i < s; ++i) r = matmul(r, r);
    return r;
}

/// exp(L * h) as a stochastic kernel; rows are renormalized to absorb the
/// last-ulp drift of the Pade evaluation.
inline TransitionKernel transition_from_generator(const Matrix& generator, double h) {
    Matrix scaled = generator;
    scaled *= h;
    Matrix e = expm(scaled);
    SignedVector data = e.a;
    const std::size_t n = e.n;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (data[i * n + j] < 0.0) data[i * n + j] = 0.0;  // clip Pade noise
            s += data[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) data[i * n + j] /= s;
    }
    return TransitionKernel::stochastic(std::move(data), n);
}

}  // namespace fkpi
