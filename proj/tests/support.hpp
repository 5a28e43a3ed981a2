#pragma once

// Shared checks for the test suites. Every projector produced anywhere in
// the library must pass require_valid_projector (Hermitian, idempotent,
// integer trace).

#include <catch2/catch.hpp>

#include "csifb/numerics.hpp"
#include "csifb/rng.hpp"

namespace testsup {

inline csifb::ComplexMatrix random_matrix(csifb::Rng& rng, std::size_t rows, std::size_t cols) {
    csifb::ComplexMatrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.complex_normal();
    return m;
}

inline csifb::ComplexMatrix random_hermitian(csifb::Rng& rng, std::size_t n) {
    return csifb::symmetrize(random_matrix(rng, n, n));
}

inline csifb::ComplexMatrix random_psd(csifb::Rng& rng, std::size_t n, std::size_t rank = 0) {
    if (rank == 0) rank = n;
    const auto g = random_matrix(rng, n, rank);
    return csifb::symmetrize(g * g.adjoint());
}

// Random Hermitian trace-1 PSD matrix (covariance-shaped target).
inline csifb::ComplexMatrix random_trace1_psd(csifb::Rng& rng, std::size_t n, std::size_t rank = 0) {
    auto m = random_psd(rng, n, rank);
    const double t = csifb::trace(m).real();
    m *= 1.0 / t;
    return m;
}

inline void require_valid_projector(const csifb::ComplexMatrix& p, std::size_t q,
                                    double tol = 1e-9) {
    REQUIRE(p.rows() == p.cols());
    REQUIRE(csifb::hermitian_deviation(p) <= tol);
    REQUIRE(csifb::frobenius_norm(p * p - p) <= tol);
    REQUIRE(std::abs(csifb::trace(p).real() - static_cast<double>(q)) <= 1e-8);
}

}  // namespace testsup
