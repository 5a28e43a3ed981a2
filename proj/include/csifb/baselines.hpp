#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "csifb/probing.hpp"
#include "csifb/subspace.hpp"

namespace csifb {

// Conventional Type-II references. Both assume the UE knows the channel
// exactly (ideal CSI-RS estimation); they serve as the high-overhead,
// high-quality comparison points.

// Q orthogonal DFT columns with the largest beam powers |b_k^H h|^2,
// ties broken by lower index.
inline SubspaceDecision dft_select(const std::vector<cplx>& h, std::size_t q,
                                   const Codebook& dft) {
    if (vec_norm(h) <= 0.0) throw std::invalid_argument("dft_select: zero channel");
    if (q > dft.k()) throw std::invalid_argument("dft_select: rank exceeds codebook size");
    const auto coeff = adjoint_vec(dft.beams, h);
    std::vector<std::size_t> order(coeff.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::norm(coeff[a]) > std::norm(coeff[b]);
    });
    std::vector<std::size_t> pick(order.begin(), order.begin() + q);
    std::sort(pick.begin(), pick.end());
    return make_decision(dft.beams.columns(pick), "conv_t2_dft");
}

inline SubspaceDecision dft_select(const std::vector<cplx>& h, std::size_t q) {
    return dft_select(h, q, dft_codebook(h.size()));
}

struct OmpResult {
    std::vector<std::size_t> indices;       // selection order
    std::vector<double> residual_norms;     // after each pick, ||r_k||
    ComplexMatrix basis;                    // orthonormal basis of selection
};

// Standard orthogonal matching pursuit over a unit-norm dictionary. Each
// round picks the column best correlated with the residual, re-projects h
// onto the selected set, and continues. Columns that are numerically
// dependent on the current selection are skipped in favor of the next-best
// candidate.
inline OmpResult omp_select(const std::vector<cplx>& h, const Codebook& dict, std::size_t q) {
    if (vec_norm(h) <= 0.0) throw std::invalid_argument("omp_select: zero channel");
    if (q > dict.k()) throw std::invalid_argument("omp_select: rank exceeds dictionary size");
    const std::size_t n = h.size();
    if (dict.n_t() != n) throw std::invalid_argument("omp_select: dimension mismatch");

    OmpResult out;
    std::vector<bool> used(dict.k(), false);
    std::vector<std::vector<cplx>> qbasis;  // orthonormal, grows per pick
    std::vector<cplx> residual = h;

    while (out.indices.size() < q) {
        const auto corr = adjoint_vec(dict.beams, residual);
        // candidates by |correlation|, descending, lower index first on ties
        std::vector<std::size_t> order;
        order.reserve(dict.k());
        for (std::size_t j = 0; j < dict.k(); ++j)
            if (!used[j]) order.push_back(j);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::norm(corr[a]) > std::norm(corr[b]);
        });

        bool picked = false;
        for (std::size_t j : order) {
            // orthogonalize candidate against current selection
            auto v = dict.beams.col(j);
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& b : qbasis) {
                    const cplx proj = vec_dot(b, v);
                    for (std::size_t r = 0; r < n; ++r) v[r] -= proj * b[r];
                }
            const double nm = vec_norm(v);
            used[j] = true;
            if (nm <= 1e-8) continue;  // numerically dependent, skip-and-continue
            for (auto& z : v) z /= nm;
            const cplx c = vec_dot(v, residual);
            for (std::size_t r = 0; r < n; ++r) residual[r] -= c * v[r];
            qbasis.push_back(std::move(v));
            out.indices.push_back(j);
            out.residual_norms.push_back(vec_norm(residual));
            picked = true;
            break;
        }
        if (!picked) break;  // dictionary exhausted
    }

    out.basis = ComplexMatrix(n, qbasis.size());
    for (std::size_t c = 0; c < qbasis.size(); ++c) out.basis.set_col(c, qbasis[c]);
    return out;
}

inline SubspaceDecision omp_subspace(const std::vector<cplx>& h, const Codebook& dict,
                                     std::size_t q) {
    auto sel = omp_select(h, dict, q);
    if (sel.basis.cols() == 0) throw std::runtime_error("omp_subspace: no usable columns");
    return make_decision(sel.basis, "conv_t2_omp");
}

}  // namespace csifb
