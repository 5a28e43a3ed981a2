#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "csifb/rng.hpp"

namespace csifb {

using cplx = std::complex<double>;

// Dense complex matrix, row-major. Small sizes only (arrays up to a few
// hundred antennas); no attempt at blocking or SIMD beyond what the
// compiler does on contiguous loops.
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, cplx{0.0, 0.0}) {}

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static ComplexMatrix column(const std::vector<cplx>& v) {
        ComplexMatrix m(v.size(), 1);
        for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    const std::vector<cplx>& data() const { return data_; }
    std::vector<cplx>& data() { return data_; }

    bool all_finite() const {
        for (const auto& z : data_)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        return true;
    }

    ComplexMatrix adjoint() const {
        ComplexMatrix out(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
        return out;
    }

    ComplexMatrix operator*(const ComplexMatrix& rhs) const {
        if (cols_ != rhs.rows_) throw std::invalid_argument("matrix product: inner dimensions differ");
        ComplexMatrix out(rows_, rhs.cols_);
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t k = 0; k < cols_; ++k) {
                const cplx aik = (*this)(i, k);
                if (aik == cplx{0.0, 0.0}) continue;
                const cplx* brow = &rhs.data_[k * rhs.cols_];
                cplx* orow = &out.data_[i * rhs.cols_];
                for (std::size_t j = 0; j < rhs.cols_; ++j) orow[j] += aik * brow[j];
            }
        }
        return out;
    }

    ComplexMatrix operator+(const ComplexMatrix& rhs) const {
        check_same_shape(rhs, "sum");
        ComplexMatrix out = *this;
        for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] += rhs.data_[i];
        return out;
    }

    ComplexMatrix operator-(const ComplexMatrix& rhs) const {
        check_same_shape(rhs, "difference");
        ComplexMatrix out = *this;
        for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] -= rhs.data_[i];
        return out;
    }

    ComplexMatrix operator*(double s) const {
        ComplexMatrix out = *this;
        for (auto& z : out.data_) z *= s;
        return out;
    }

    ComplexMatrix& operator+=(const ComplexMatrix& rhs) {
        check_same_shape(rhs, "sum");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
        return *this;
    }

    ComplexMatrix& operator*=(double s) {
        for (auto& z : data_) z *= s;
        return *this;
    }

    std::vector<cplx> col(std::size_t c) const {
        std::vector<cplx> v(rows_);
        for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
        return v;
    }

    void set_col(std::size_t c, const std::vector<cplx>& v) {
        for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
    }

    ComplexMatrix columns(const std::vector<std::size_t>& idx) const {
        ComplexMatrix out(rows_, idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j)
            for (std::size_t r = 0; r < rows_; ++r) out(r, j) = (*this)(r, idx[j]);
        return out;
    }

private:
    void check_same_shape(const ComplexMatrix& rhs, const char* op) const {
        if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
            throw std::invalid_argument(std::string("matrix ") + op + ": shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

inline double frobenius_norm(const ComplexMatrix& m) {
    double s = 0.0;
    for (const auto& z : m.data()) s += std::norm(z);
    return std::sqrt(s);
}

inline cplx trace(const ComplexMatrix& m) {
    cplx t{0.0, 0.0};
    const std::size_t n = std::min(m.rows(), m.cols());
    for (std::size_t i = 0; i < n; ++i) t += m(i, i);
    return t;
}

inline double vec_norm(const std::vector<cplx>& v) {
    double s = 0.0;
    for (const auto& z : v) s += std::norm(z);
    return std::sqrt(s);
}

inline cplx vec_dot(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    cplx s{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

// y = M x
inline std::vector<cplx> mat_vec(const ComplexMatrix& m, const std::vector<cplx>& x) {
    if (m.cols() != x.size()) throw std::invalid_argument("mat_vec: dimension mismatch");
    std::vector<cplx> y(m.rows(), cplx{0.0, 0.0});
    for (std::size_t r = 0; r < m.rows(); ++r) {
        cplx s{0.0, 0.0};
        for (std::size_t c = 0; c < m.cols(); ++c) s += m(r, c) * x[c];
        y[r] = s;
    }
    return y;
}

// y = M^H x
inline std::vector<cplx> adjoint_vec(const ComplexMatrix& m, const std::vector<cplx>& x) {
    if (m.rows() != x.size()) throw std::invalid_argument("adjoint_vec: dimension mismatch");
    std::vector<cplx> y(m.cols(), cplx{0.0, 0.0});
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const cplx xr = x[r];
        for (std::size_t c = 0; c < m.cols(); ++c) y[c] += std::conj(m(r, c)) * xr;
    }
    return y;
}

// A <- (A + A^H)/2, diagonal forced real.
inline ComplexMatrix symmetrize(const ComplexMatrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("symmetrize: matrix not square");
    ComplexMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j)
            out(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));
        out(i, i) = cplx{out(i, i).real(), 0.0};
    }
    return out;
}

inline double hermitian_deviation(const ComplexMatrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) s += std::norm(a(i, j) - std::conj(a(j, i)));
    return std::sqrt(s);
}

struct HermitianEig {
    std::vector<double> eigenvalues;  // sorted descending
    ComplexMatrix eigenvectors;       // orthonormal columns, aligned with eigenvalues
};

// Fix each column's gauge: largest-magnitude entry made real nonnegative.
// Keeps serialized eigenvectors reproducible across runs.
inline void normalize_column_phases(ComplexMatrix& v) {
    for (std::size_t c = 0; c < v.cols(); ++c) {
        std::size_t imax = 0;
        double best = -1.0;
        for (std::size_t r = 0; r < v.rows(); ++r) {
            const double m = std::abs(v(r, c));
            if (m > best + 1e-15) {
                best = m;
                imax = r;
            }
        }
        if (best <= 0.0) continue;
        const cplx z = v(imax, c);
        const cplx phase = std::conj(z) / std::abs(z);
        for (std::size_t r = 0; r < v.rows(); ++r) v(r, c) *= phase;
    }
}

// Full spectral decomposition of a Hermitian matrix by cyclic complex
// Jacobi rotations. Input is symmetrized first; non-Hermitian input beyond
// 1e-12 relative is rejected.
inline HermitianEig hermitian_eig(const ComplexMatrix& a_in) {
    const std::size_t n = a_in.rows();
    if (n != a_in.cols()) throw std::invalid_argument("hermitian_eig: matrix not square");
    if (!a_in.all_finite()) throw std::invalid_argument("hermitian_eig: non-finite entries");
    const double scale = std::max(1.0, frobenius_norm(a_in));
    if (hermitian_deviation(a_in) > 1e-12 * scale)
        throw std::invalid_argument("hermitian_eig: input not Hermitian within tolerance");

    ComplexMatrix a = symmetrize(a_in);
    ComplexMatrix v = ComplexMatrix::identity(n);
    cplx* ad = a.data().data();
    cplx* vd = v.data().data();

    auto offdiag_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += std::norm(ad[i * n + j]);
        return std::sqrt(2.0 * s);
    };

    const double tol = 1e-13 * scale;
    // Rotations below this threshold cannot move the off-diagonal norm past
    // tol, so they are skipped.
    const double skip = tol / (2.0 * static_cast<double>(n));
    const int max_sweeps = 60;
    int sweep = 0;
    while (offdiag_norm() > tol) {
        if (++sweep > max_sweeps)
            throw std::runtime_error("hermitian_eig: Jacobi sweeps did not converge");
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const cplx apq = ad[p * n + q];
                const double mag = std::abs(apq);
                if (mag <= skip) continue;
                const cplx phase = apq / mag;  // e^{i theta}
                const double app = ad[p * n + p].real();
                const double aqq = ad[q * n + q].real();
                // Real rotation angle after phase removal: smaller-magnitude
                // root of t^2 - 2*tau*t - 1 = 0.
                const double tau = (aqq - app) / (2.0 * mag);
                const double t = ((tau >= 0.0) ? -1.0 : 1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                // 2x2 unitary J on coords (p,q):
                //   J_pp = c, J_pq = -s, J_qp = s*conj(phase), J_qq = c*conj(phase)
                const cplx jqp = s * std::conj(phase);
                const cplx jqq = c * std::conj(phase);
                const cplx jqp_c = std::conj(jqp);
                const cplx jqq_c = std::conj(jqq);
                // columns p,q: M <- M J
                for (std::size_t k = 0; k < n; ++k) {
                    cplx* row = ad + k * n;
                    const cplx mkp = row[p];
                    const cplx mkq = row[q];
                    row[p] = c * mkp + jqp * mkq;
                    row[q] = -s * mkp + jqq * mkq;
                }
                // rows p,q: M <- J^H M
                {
                    cplx* rp = ad + p * n;
                    cplx* rq = ad + q * n;
                    for (std::size_t k = 0; k < n; ++k) {
                        const cplx mpk = rp[k];
                        const cplx mqk = rq[k];
                        rp[k] = c * mpk + jqp_c * mqk;
                        rq[k] = -s * mpk + jqq_c * mqk;
                    }
                }
                ad[p * n + q] = cplx{0.0, 0.0};
                ad[q * n + p] = cplx{0.0, 0.0};
                ad[p * n + p] = cplx{ad[p * n + p].real(), 0.0};
                ad[q * n + q] = cplx{ad[q * n + q].real(), 0.0};
                // accumulate V <- V J
                for (std::size_t k = 0; k < n; ++k) {
                    cplx* row = vd + k * n;
                    const cplx vkp = row[p];
                    const cplx vkq = row[q];
                    row[p] = c * vkp + jqp * vkq;
                    row[q] = -s * vkp + jqq * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return a(i, i).real() > a(j, j).real();
    });

    HermitianEig out;
    out.eigenvalues.resize(n);
    out.eigenvectors = ComplexMatrix(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        out.eigenvalues[c] = a(order[c], order[c]).real();
        for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, c) = v(r, order[c]);
    }
    normalize_column_phases(out.eigenvectors);
    return out;
}

// Largest |eigenvalue| of a Hermitian matrix.
inline double spectral_norm_hermitian(const ComplexMatrix& a) {
    const auto eig = hermitian_eig(symmetrize(a));
    double m = 0.0;
    for (double lam : eig.eigenvalues) m = std::max(m, std::abs(lam));
    return m;
}

// Orthonormal basis with the same column span, via twice-iterated modified
// Gram-Schmidt. Rank checked up front on the Gram matrix of the
// column-normalized input (smallest singular value must exceed 1e-10).
inline ComplexMatrix orthonormalize(const ComplexMatrix& u) {
    const std::size_t n = u.rows();
    const std::size_t k = u.cols();
    if (k == 0) throw std::invalid_argument("orthonormalize: no columns");
    if (k > n) throw std::invalid_argument("orthonormalize: more columns than rows (rank-deficient)");
    if (!u.all_finite()) throw std::invalid_argument("orthonormalize: non-finite entries");

    ComplexMatrix un(n, k);
    for (std::size_t c = 0; c < k; ++c) {
        auto v = u.col(c);
        const double nm = vec_norm(v);
        if (nm <= 1e-300) throw std::invalid_argument("orthonormalize: zero column (rank-deficient)");
        for (auto& z : v) z /= nm;
        un.set_col(c, v);
    }
    const ComplexMatrix gram = un.adjoint() * un;
    const auto ge = hermitian_eig(gram);
    if (ge.eigenvalues.back() <= 1e-20)
        throw std::invalid_argument("orthonormalize: rank-deficient input");

    ComplexMatrix q(n, k);
    for (std::size_t c = 0; c < k; ++c) {
        auto v = u.col(c);
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < c; ++j) {
                const auto qj = q.col(j);
                const cplx proj = vec_dot(qj, v);
                for (std::size_t r = 0; r < n; ++r) v[r] -= proj * qj[r];
            }
        }
        const double nm = vec_norm(v);
        if (nm <= 1e-12 * vec_norm(u.col(c)))
            throw std::invalid_argument("orthonormalize: rank-deficient input");
        for (auto& z : v) z /= nm;
        q.set_col(c, v);
    }
    return q;
}

// P = U (U^H U)^{-1} U^H, realized through an orthonormal basis of span(U).
inline ComplexMatrix projector_from_basis(const ComplexMatrix& u) {
    const ComplexMatrix q = orthonormalize(u);
    ComplexMatrix p = q * q.adjoint();
    return symmetrize(p);
}

// Dominant rank-Q subspace of a Hermitian PSD matrix by orthogonal
// (block power) iteration. Independent of hermitian_eig; used as its
// cross-check oracle.
inline ComplexMatrix power_iteration_topq(const ComplexMatrix& a_in, std::size_t q,
                                          std::size_t max_iters = 10000) {
    const std::size_t n = a_in.rows();
    if (n != a_in.cols()) throw std::invalid_argument("power_iteration_topq: matrix not square");
    if (q == 0 || q > n) throw std::invalid_argument("power_iteration_topq: bad subspace rank");
    const ComplexMatrix a = symmetrize(a_in);

    Rng rng(0x706f776572ULL);  // fixed stream keeps the function pure
    ComplexMatrix x(n, q);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < q; ++c) x(r, c) = rng.complex_normal();
    x = orthonormalize(x);

    ComplexMatrix p_prev = x * x.adjoint();
    for (std::size_t it = 0; it < max_iters; ++it) {
        x = orthonormalize(a * x);
        ComplexMatrix p = x * x.adjoint();
        const double delta = frobenius_norm(p - p_prev);
        p_prev = p;
        if (delta <= 1e-13 * static_cast<double>(n)) return x;
    }
    throw std::runtime_error("power_iteration_topq: iteration cap exceeded without convergence");
}

}  // namespace csifb
