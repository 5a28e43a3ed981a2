#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "csifb/numerics.hpp"

namespace csifb {

// Projector-based CSI representation: capture efficiency, MRT restricted to
// a subspace, dominant-eigenspace extraction, and the capture-power-loss
// bound machinery.

struct SubspaceDecision {
    ComplexMatrix basis;      // n_t x q, orthonormal columns
    ComplexMatrix projector;  // n_t x n_t = basis * basis^H
    std::size_t rank_q = 0;
    std::string scheme_tag;
};

inline SubspaceDecision make_decision(const ComplexMatrix& orthonormal_basis,
                                      std::string scheme_tag) {
    SubspaceDecision d;
    d.basis = orthonormal_basis;
    d.projector = symmetrize(orthonormal_basis * orthonormal_basis.adjoint());
    d.rank_q = orthonormal_basis.cols();
    d.scheme_tag = std::move(scheme_tag);
    return d;
}

// ||P h||^2 / ||h||^2, the fraction of channel power preserved by P.
inline double capture_efficiency(const ComplexMatrix& p, const std::vector<cplx>& h) {
    const double hn = vec_norm(h);
    if (hn <= 0.0) throw std::invalid_argument("capture_efficiency: zero channel");
    const auto ph = mat_vec(p, h);
    const double num = vec_norm(ph);
    return (num * num) / (hn * hn);
}

// Cheaper equivalent when the orthonormal basis is at hand:
// sum_i |u_i^H h|^2 / ||h||^2.
inline double capture_efficiency_basis(const ComplexMatrix& basis, const std::vector<cplx>& h) {
    const double hn = vec_norm(h);
    if (hn <= 0.0) throw std::invalid_argument("capture_efficiency: zero channel");
    const auto c = adjoint_vec(basis, h);
    double s = 0.0;
    for (const auto& z : c) s += std::norm(z);
    return s / (hn * hn);
}

// w = P h / ||P h||; the achieved SNR fraction is exactly the capture
// efficiency.
inline std::vector<cplx> mrt_within_subspace(const ComplexMatrix& p, const std::vector<cplx>& h) {
    auto ph = mat_vec(p, h);
    const double n = vec_norm(ph);
    if (n <= 1e-12)
        throw std::runtime_error("mrt_within_subspace: channel orthogonal to subspace");
    for (auto& z : ph) z /= n;
    return ph;
}

// Projector onto the dominant-Q eigenspace of a Hermitian PSD matrix.
// Eigenvalue ties resolve per the eigensolver's ordering; the result is a
// valid rank-Q projector regardless.
inline SubspaceDecision rank_q_extract(const ComplexMatrix& a, std::size_t q,
                                       std::string scheme_tag = "rank_q") {
    if (q == 0 || q > a.rows()) throw std::invalid_argument("rank_q_extract: bad rank");
    const auto e = hermitian_eig(symmetrize(a));
    std::vector<std::size_t> idx(q);
    for (std::size_t i = 0; i < q; ++i) idx[i] = i;
    return make_decision(e.eigenvectors.columns(idx), std::move(scheme_tag));
}

// One rank-1 component w * v v^H of a covariance-style mixture.
struct WeightedDirection {
    std::vector<cplx> v;  // unit norm
    double weight = 0.0;
};

inline ComplexMatrix mixture_matrix(const std::vector<WeightedDirection>& parts, std::size_t n_t) {
    ComplexMatrix m(n_t, n_t);
    for (const auto& part : parts)
        for (std::size_t i = 0; i < n_t; ++i)
            for (std::size_t j = 0; j < n_t; ++j)
                m(i, j) += part.weight * part.v[i] * std::conj(part.v[j]);
    return symmetrize(m);
}

// Orthonormal basis of span{parts}, dropping near-dependent directions.
inline ComplexMatrix orthonormal_range(const std::vector<WeightedDirection>& parts,
                                       std::size_t n_t, double drop_tol = 1e-8) {
    std::vector<std::vector<cplx>> basis;
    for (const auto& part : parts) {
        auto v = part.v;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) {
                const cplx proj = vec_dot(b, v);
                for (std::size_t r = 0; r < n_t; ++r) v[r] -= proj * b[r];
            }
        const double nm = vec_norm(v);
        if (nm <= drop_tol) continue;
        for (auto& z : v) z /= nm;
        basis.push_back(std::move(v));
    }
    ComplexMatrix w(n_t, basis.size());
    for (std::size_t c = 0; c < basis.size(); ++c) w.set_col(c, basis[c]);
    return w;
}

// rank_q_extract specialized to an explicit rank-1 mixture: the
// eigenproblem is solved in the (much smaller) range space and lifted
// back. Agrees with rank_q_extract(mixture_matrix(...), q) up to
// eigenvalue ties; when the mixture spans fewer than q directions the
// basis is completed with deterministic standard-basis fill-ins (the
// trailing eigenvalues are zero either way).
inline SubspaceDecision rank_q_extract_mixture(const std::vector<WeightedDirection>& parts,
                                               std::size_t n_t, std::size_t q,
                                               std::string scheme_tag = "rank_q") {
    if (q == 0 || q > n_t) throw std::invalid_argument("rank_q_extract_mixture: bad rank");
    if (parts.empty()) throw std::invalid_argument("rank_q_extract_mixture: empty mixture");
    ComplexMatrix w = orthonormal_range(parts, n_t);
    std::size_t r = w.cols();
    if (r == 0) throw std::invalid_argument("rank_q_extract_mixture: mixture has empty range");

    // compressed matrix M = W^H A W from the rank-1 pieces
    ComplexMatrix m(r, r);
    for (const auto& part : parts) {
        const auto c = adjoint_vec(w, part.v);  // r-vector
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j)
                m(i, j) += part.weight * c[i] * std::conj(c[j]);
    }
    const auto e = hermitian_eig(symmetrize(m));

    const std::size_t take = std::min(q, r);
    std::vector<std::size_t> idx(take);
    for (std::size_t i = 0; i < take; ++i) idx[i] = i;
    ComplexMatrix lifted = w * e.eigenvectors.columns(idx);

    if (take < q) {
        // complete with standard-basis directions orthogonal to the span
        ComplexMatrix full(n_t, q);
        for (std::size_t c = 0; c < take; ++c) full.set_col(c, lifted.col(c));
        std::size_t have = take;
        for (std::size_t cand = 0; cand < n_t && have < q; ++cand) {
            std::vector<cplx> v(n_t, cplx{0.0, 0.0});
            v[cand] = 1.0;
            for (int pass = 0; pass < 2; ++pass)
                for (std::size_t c = 0; c < have; ++c) {
                    const auto b = full.col(c);
                    const cplx proj = vec_dot(b, v);
                    for (std::size_t rr = 0; rr < n_t; ++rr) v[rr] -= proj * b[rr];
                }
            const double nm = vec_norm(v);
            if (nm <= 1e-6) continue;
            for (auto& z : v) z /= nm;
            full.set_col(have++, v);
        }
        lifted = full;
    }
    return make_decision(lifted, std::move(scheme_tag));
}

// loss = tr[(Pi_Q(R_true) - Pi_Q(A_mix)) R_true],
// bound = 2 Q ||A_mix - R_true||_2. The loss is the capture-power gap to
// the full-CSI reference subspace and is controlled by the covariance
// estimation error.
inline std::pair<double, double> kyfan_loss_and_bound(const ComplexMatrix& a_mix,
                                                      const ComplexMatrix& r_true,
                                                      std::size_t q) {
    if (a_mix.rows() != r_true.rows() || a_mix.cols() != r_true.cols())
        throw std::invalid_argument("kyfan_loss_and_bound: shape mismatch");
    const auto p_ref = rank_q_extract(r_true, q).projector;
    const auto p_hat = rank_q_extract(a_mix, q).projector;
    const double loss = trace((p_ref - p_hat) * r_true).real();
    const double bound =
        2.0 * static_cast<double>(q) * spectral_norm_hermitian(symmetrize(a_mix - r_true));
    return {loss, bound};
}

// (1 - T_o/T) log2(1 + rho * eta)
inline double effective_rate(double eta, double rho_db, double overhead_uses,
                             double coherence_uses) {
    if (eta < 0.0 || eta > 1.0 + 1e-9)
        throw std::invalid_argument("effective_rate: eta out of [0,1]");
    if (overhead_uses < 0.0 || coherence_uses <= 0.0 || overhead_uses > coherence_uses)
        throw std::invalid_argument("effective_rate: overhead exceeds coherence interval");
    const double rho = std::pow(10.0, rho_db / 10.0);
    return (1.0 - overhead_uses / coherence_uses) * std::log2(1.0 + rho * std::min(eta, 1.0));
}

}  // namespace csifb
