#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "csifb/channel.hpp"
#include "csifb/numerics.hpp"
#include "csifb/rng.hpp"

namespace csifb {

// SSB probing codebooks, the dB-domain RSRP measurement operator,
// calibration keys, and sensing-design diagnostics.

enum class CodebookKind { dft_full, dft_sub, random_beams, learned };
enum class BeamConstraint { unconstrained, phase_only };

inline std::string codebook_kind_name(CodebookKind k) {
    switch (k) {
        case CodebookKind::dft_full: return "dft_full";
        case CodebookKind::dft_sub: return "dft_sub";
        case CodebookKind::random_beams: return "random";
        case CodebookKind::learned: return "learned";
    }
    return "?";
}

struct Codebook {
    ComplexMatrix beams;  // n_t x k, unit-norm columns
    CodebookKind kind = CodebookKind::dft_full;
    BeamConstraint constraint = BeamConstraint::unconstrained;

    std::size_t n_t() const { return beams.rows(); }
    std::size_t k() const { return beams.cols(); }

    void validate() const {
        for (std::size_t c = 0; c < beams.cols(); ++c) {
            if (std::fabs(vec_norm(beams.col(c)) - 1.0) > 1e-10)
                throw std::invalid_argument("codebook: column not unit norm");
        }
        if (constraint == BeamConstraint::phase_only) {
            const double want = 1.0 / std::sqrt(static_cast<double>(beams.rows()));
            for (const auto& z : beams.data())
                if (std::fabs(std::abs(z) - want) > 1e-10)
                    throw std::invalid_argument("codebook: entry violates phase-only modulus");
        }
    }

    // Content-derived identifier; ties fingerprints, models and memories
    // to the exact probing beams that produced them.
    std::string id() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto eat = [&h](std::uint64_t x) {
            for (int b = 0; b < 8; ++b) {
                h ^= (x >> (8 * b)) & 0xff;
                h *= 0x100000001b3ULL;
            }
        };
        eat(static_cast<std::uint64_t>(kind));
        eat(beams.rows());
        eat(beams.cols());
        for (const auto& z : beams.data()) {
            std::uint64_t bits;
            double re = z.real(), im = z.imag();
            static_assert(sizeof(double) == 8);
            __builtin_memcpy(&bits, &re, 8);
            eat(bits);
            __builtin_memcpy(&bits, &im, 8);
            eat(bits);
        }
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s-%zux%zu-%016llx", codebook_kind_name(kind).c_str(),
                      beams.rows(), beams.cols(), static_cast<unsigned long long>(h));
        return buf;
    }
};

struct RsrpFingerprint {
    std::vector<double> values_db;
    std::string codebook_id;
    double noise_sigma_db = 0.0;
};

struct CalibrationKey {
    std::vector<double> key;  // unit Euclidean norm

    void validate() const {
        if (std::fabs(vec2_norm() - 1.0) > 1e-12)
            throw std::invalid_argument("calibration key: not unit norm");
    }
    double vec2_norm() const {
        double s = 0.0;
        for (double x : key) s += x * x;
        return std::sqrt(s);
    }
};

inline double key_cosine(const CalibrationKey& a, const CalibrationKey& b) {
    if (a.key.size() != b.key.size())
        throw std::invalid_argument("key_cosine: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.key.size(); ++i) s += a.key[i] * b.key[i];
    return s;
}

// [D]_{n,k} = (1/sqrt(n)) e^{-j 2 pi n k / n}; unitary, constant modulus.
inline Codebook dft_codebook(std::size_t n) {
    if (n < 1) throw std::invalid_argument("dft_codebook: n must be >= 1");
    Codebook cb;
    cb.kind = CodebookKind::dft_full;
    cb.constraint = BeamConstraint::phase_only;
    cb.beams = ComplexMatrix(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const double ang = -2.0 * M_PI * static_cast<double>(r) * static_cast<double>(c) /
                               static_cast<double>(n);
            cb.beams(r, c) = scale * cplx{std::cos(ang), std::sin(ang)};
        }
    return cb;
}

// Steering-vector grid at u = k/(oversample*n_t); the Type-II search dictionary.
inline Codebook dft_dictionary(std::size_t n_t, std::size_t oversample) {
    if (oversample < 1) throw std::invalid_argument("dft_dictionary: oversample must be >= 1");
    Codebook cb;
    cb.kind = oversample == 1 ? CodebookKind::dft_full : CodebookKind::dft_sub;
    cb.constraint = BeamConstraint::phase_only;
    const std::size_t cols = oversample * n_t;
    cb.beams = ComplexMatrix(n_t, cols);
    for (std::size_t c = 0; c < cols; ++c) {
        const auto a = steering_vector(static_cast<double>(c) / static_cast<double>(cols), n_t);
        cb.beams.set_col(c, a);
    }
    return cb;
}

// First k columns of a seeded random phase-only codebook.
inline Codebook random_codebook(std::size_t n_t, std::size_t k, std::uint64_t seed) {
    Codebook cb;
    cb.kind = CodebookKind::random_beams;
    cb.constraint = BeamConstraint::phase_only;
    cb.beams = ComplexMatrix(n_t, k);
    Rng rng(mix_seed(0x72616e64ULL, seed));
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_t));
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t r = 0; r < n_t; ++r) {
            const double ang = rng.uniform(0.0, 2.0 * M_PI);
            cb.beams(r, c) = scale * cplx{std::cos(ang), std::sin(ang)};
        }
    return cb;
}

// dB-domain fingerprint: 10 log10(P |b_k^H h|^2) + Gaussian noise. The
// noiseless power is floored at -250 dB so a beam exactly orthogonal to h
// stays finite.
inline RsrpFingerprint measure_rsrp(const UeChannel& ch, const Codebook& cb,
                                    double noise_sigma_db, std::uint64_t seed,
                                    double tx_power_db = 40.0) {
    if (ch.h.size() != cb.n_t()) throw std::invalid_argument("measure_rsrp: dimension mismatch");
    if (noise_sigma_db < 0.0) throw std::invalid_argument("measure_rsrp: negative noise sigma");
    if (vec_norm(ch.h) <= 0.0) throw std::invalid_argument("measure_rsrp: zero channel");

    RsrpFingerprint r;
    r.codebook_id = cb.id();
    r.noise_sigma_db = noise_sigma_db;
    r.values_db.resize(cb.k());
    Rng rng(mix_seed(0x72737270ULL, seed));
    const double p_lin = std::pow(10.0, tx_power_db / 10.0);
    for (std::size_t k = 0; k < cb.k(); ++k) {
        const cplx ip = vec_dot(cb.beams.col(k), ch.h);
        const double power = std::max(p_lin * std::norm(ip), 1e-25);
        double v = 10.0 * std::log10(power);
        if (noise_sigma_db > 0.0) v += rng.normal(0.0, noise_sigma_db);
        r.values_db[k] = v;
    }
    return r;
}

enum class KeyDomain { db, linear };

inline KeyDomain key_domain_from_name(const std::string& s) {
    if (s == "db") return KeyDomain::db;
    if (s == "linear") return KeyDomain::linear;
    throw std::invalid_argument("unknown key domain: " + s);
}

// Normalized fingerprint used both for retrieval and as the memory key.
// db mode normalizes the raw dB vector; linear mode converts to linear
// power first (gain-invariant in the noise-free case).
inline CalibrationKey make_key(const RsrpFingerprint& r, KeyDomain domain = KeyDomain::db) {
    std::vector<double> v = r.values_db;
    if (domain == KeyDomain::linear)
        for (double& x : v) x = std::pow(10.0, x / 10.0);
    double nrm = 0.0;
    for (double x : v) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm <= 0.0) throw std::invalid_argument("make_key: zero fingerprint");
    for (double& x : v) x /= nrm;
    return CalibrationKey{std::move(v)};
}

// lambda_min(S S^H): worst-case collected sensing energy over unit-norm
// channel directions.
inline double worst_case_sensing_energy(const Codebook& s) {
    const ComplexMatrix g = symmetrize(s.beams * s.beams.adjoint());
    const auto e = hermitian_eig(g);
    return e.eigenvalues.back();
}

// (1/(K(K-1))) sum_{i != j} |b_i^H b_j|^2
inline double gram_offdiag_energy(const Codebook& b) {
    const std::size_t k = b.k();
    if (k < 2) throw std::invalid_argument("gram_offdiag_energy: need at least two beams");
    const ComplexMatrix g = b.beams.adjoint() * b.beams;
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (i != j) s += std::norm(g(i, j));
    return s / (static_cast<double>(k) * static_cast<double>(k - 1));
}

// diag(S^H R S): site-average received power along each sensing direction.
inline std::vector<double> directional_power_statistic(const Codebook& s,
                                                       const ComplexMatrix& r) {
    if (r.rows() != s.n_t() || r.cols() != s.n_t())
        throw std::invalid_argument("directional_power_statistic: dimension mismatch");
    std::vector<double> out(s.k());
    for (std::size_t k = 0; k < s.k(); ++k) {
        const auto col = s.beams.col(k);
        const auto rc = mat_vec(r, col);
        out[k] = std::max(0.0, vec_dot(col, rc).real());
    }
    return out;
}

}  // namespace csifb
