#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace realdrl {

using Vector = Eigen::VectorXd;
using RectMatrix = Eigen::MatrixXd;

struct InvalidMatrix : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NotPositiveDefinite : std::domain_error {
    using std::domain_error::domain_error;
};

// Square matrix whose entries are exactly symmetric. Construction from a
// dense matrix averages it with its transpose; writes mirror.
class SymMatrix {
public:
    SymMatrix() = default;

    explicit SymMatrix(int order) : m_(RectMatrix::Zero(order, order)) {
        if (order < 1) throw InvalidMatrix("SymMatrix: order must be >= 1");
    }

    explicit SymMatrix(const RectMatrix& m) {
        if (m.rows() != m.cols() || m.rows() < 1)
            throw InvalidMatrix("SymMatrix: square input required");
        m_ = 0.5 * (m + m.transpose());
        // the average is symmetric mathematically; make it so bitwise
        for (Eigen::Index i = 0; i < m_.rows(); ++i)
            for (Eigen::Index j = 0; j < i; ++j) m_(j, i) = m_(i, j);
    }

    static SymMatrix identity(int n) { return SymMatrix(RectMatrix::Identity(n, n)); }

    static SymMatrix diagonal(const Vector& d) {
        return SymMatrix(RectMatrix(d.asDiagonal()));
    }

    int order() const { return static_cast<int>(m_.rows()); }
    double operator()(int i, int j) const { return m_(i, j); }

    void set(int i, int j, double v) {
        m_(i, j) = v;
        m_(j, i) = v;
    }

    const RectMatrix& dense() const { return m_; }

    bool finite() const { return m_.allFinite(); }

    double quad(const Vector& s) const { return s.dot(m_ * s); }

    friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
        return SymMatrix(a.m_ + b.m_);
    }
    friend SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
        return SymMatrix(a.m_ - b.m_);
    }
    friend SymMatrix operator*(double k, const SymMatrix& a) { return SymMatrix(k * a.m_); }

private:
    RectMatrix m_;
};

struct EigenDecomposition {
    Vector values;        // ascending
    RectMatrix vectors;   // column i pairs with values[i]
};

// Cyclic Jacobi rotations, sweeping until the off-diagonal mass is negligible.
inline EigenDecomposition sym_eigen(const SymMatrix& m) {
    if (!m.finite()) throw InvalidMatrix("sym_eigen: non-finite input");
    const int n = m.order();
    RectMatrix a = m.dense();
    RectMatrix v = RectMatrix::Identity(n, n);

    const double scale = std::max(1.0, a.norm());
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= 1e-15 * scale) break;

        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0.0;
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int i, int j) { return a(i, i) < a(j, j); });
    EigenDecomposition out{Vector(n), RectMatrix(n, n)};
    for (int k = 0; k < n; ++k) {
        out.values[k] = a(idx[k], idx[k]);
        out.vectors.col(k) = v.col(idx[k]);
    }
    return out;
}

inline double min_eigenvalue(const SymMatrix& m) { return sym_eigen(m).values[0]; }

inline double min_eigenvalue(const RectMatrix& m) { return min_eigenvalue(SymMatrix(m)); }

// Lower Cholesky factor, or nullopt when a pivot is not strictly positive.
inline std::optional<RectMatrix> cholesky(const RectMatrix& m) {
    const Eigen::Index n = m.rows();
    RectMatrix l = RectMatrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = m(j, j);
        for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
        l(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

// Inverse from a lower Cholesky factor, via forward then backward substitution.
inline RectMatrix cholesky_inverse(const RectMatrix& l) {
    const Eigen::Index n = l.rows();
    RectMatrix linv = RectMatrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        linv(j, j) = 1.0 / l(j, j);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double s = 0.0;
            for (Eigen::Index k = j; k < i; ++k) s -= l(i, k) * linv(k, j);
            linv(i, j) = s / l(i, i);
        }
    }
    return linv.transpose() * linv;
}

inline double cholesky_logdet(const RectMatrix& l) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

inline SymMatrix invert_spd(const SymMatrix& m) {
    if (!m.finite()) throw InvalidMatrix("invert_spd: non-finite input");
    auto l = cholesky(m.dense());
    if (!l || min_eigenvalue(m) <= 0.0)
        throw NotPositiveDefinite("invert_spd: matrix is not positive definite");
    return SymMatrix(cholesky_inverse(*l));
}

inline RectMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = static_cast<Eigen::Index>(rows.begin()->size());
    RectMatrix m(r, c);
    Eigen::Index i = 0;
    for (const auto& row : rows) {
        if (static_cast<Eigen::Index>(row.size()) != c)
            throw InvalidMatrix("from_rows: ragged rows");
        Eigen::Index j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

inline Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace realdrl
