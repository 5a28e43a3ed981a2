#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include "csifb/calibration.hpp"
#include "csifb/probing.hpp"

namespace csifb {

// Gradient-free probing-codebook optimization. The objective is the mean
// downstream capture efficiency of the retrieval pipeline (keys measured
// with the candidate beams, neighbor projector averaging, rank-Q
// extraction) on a held-out validation split. Beams stay phase-only
// throughout, and moves that push the mean off-diagonal Gram energy past
// the bound are rejected.

struct CodebookLearnConfig {
    std::size_t k_beams = 16;
    std::size_t q_rank = 4;
    std::uint64_t seed = 0;
    int restarts = 2;
    int sweeps = 2;
    int candidates_per_beam = 3;
    std::size_t val_ues = 48;
    std::size_t memory_ues = 160;
    double gram_bound = 0.05;
    double max_coherence = 0.98;  // no near-duplicate beams
    double noise_sigma_db = 0.0;
    double phase_jitter = 0.35;  // radians
    std::vector<std::size_t> neighborhood_sizes{5, 10, 20};
    KeyDomain key_domain = KeyDomain::db;
};

// K DFT-N_t beams steered at the K strongest bins of the training-set
// site-level directional-power statistic diag(D^H R D). Distinct DFT
// columns, so the initial Gram off-diagonal energy is exactly zero.
inline Codebook steered_dft_init(const std::vector<UeChannel>& train, std::size_t n_t,
                                 std::size_t k_beams) {
    if (k_beams > n_t) throw std::invalid_argument("steered_dft_init: more beams than antennas");
    if (train.empty()) throw std::invalid_argument("steered_dft_init: empty training set");
    const Codebook dft = dft_codebook(n_t);
    std::vector<double> power(n_t, 0.0);
    for (const auto& ue : train) {
        const auto coeff = adjoint_vec(dft.beams, ue.h);
        for (std::size_t b = 0; b < n_t; ++b) power[b] += std::norm(coeff[b]);
    }
    std::vector<std::size_t> order(n_t);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return power[a] > power[b]; });
    std::vector<std::size_t> pick(order.begin(), order.begin() + k_beams);
    std::sort(pick.begin(), pick.end());

    Codebook cb;
    cb.kind = CodebookKind::learned;
    cb.constraint = BeamConstraint::phase_only;
    cb.beams = dft.beams.columns(pick);
    return cb;
}

namespace detail {

// Mean capture efficiency of the retrieval pipeline under candidate beams.
inline double codebook_objective(const Codebook& cb, const std::vector<UeChannel>& memory_ues,
                                 const std::vector<UeChannel>& val_ues,
                                 const CodebookLearnConfig& cfg) {
    FusionConfig fus;
    fus.neighborhood_sizes = cfg.neighborhood_sizes;
    fus.key_domain = cfg.key_domain;
    const auto mem = build_memory(-1, memory_ues, cb, cfg.noise_sigma_db, cfg.key_domain,
                                  mix_seed(cfg.seed, 0x6d656dULL));
    double acc = 0.0;
    for (std::size_t i = 0; i < val_ues.size(); ++i) {
        const auto r = measure_rsrp(val_ues[i], cb, cfg.noise_sigma_db,
                                    mix_seed(cfg.seed, 0x76616cULL + i));
        const auto key = make_key(r, cfg.key_domain);
        const auto parts = memory_mixture(key, mem, fus);
        const auto dec = rank_q_extract_mixture(parts, cb.n_t(), cfg.q_rank, "cbk");
        acc += capture_efficiency_basis(dec.basis, val_ues[i].h);
    }
    return acc / static_cast<double>(val_ues.size());
}

inline std::vector<cplx> phase_only_beam(const std::vector<double>& phases) {
    std::vector<cplx> v(phases.size());
    const double scale = 1.0 / std::sqrt(static_cast<double>(phases.size()));
    for (std::size_t i = 0; i < phases.size(); ++i)
        v[i] = scale * cplx{std::cos(phases[i]), std::sin(phases[i])};
    return v;
}

inline double max_pairwise_coherence(const Codebook& cb) {
    double worst = 0.0;
    for (std::size_t i = 0; i < cb.k(); ++i)
        for (std::size_t j = i + 1; j < cb.k(); ++j)
            worst = std::max(worst, std::abs(vec_dot(cb.beams.col(i), cb.beams.col(j))));
    return worst;
}

}  // namespace detail

// Iterative random-restart coordinate ascent on beam phases. Returns the
// best codebook found; if it somehow fails the Gram bound a warning is
// printed and the best-found codebook is returned anyway.
inline Codebook learn_probing_codebook(const std::vector<UeChannel>& train_ues,
                                       const CodebookLearnConfig& cfg) {
    if (cfg.k_beams < 2) throw std::invalid_argument("learn_probing_codebook: need >= 2 beams");
    if (train_ues.size() < cfg.memory_ues + cfg.val_ues)
        throw std::invalid_argument("learn_probing_codebook: training set too small for splits");
    const std::size_t n_t = train_ues.front().h.size();

    // deterministic split, strided so both parts cover every source site
    std::vector<UeChannel> memory_ues, val_ues;
    {
        const std::size_t stride = std::max<std::size_t>(1, train_ues.size() / cfg.val_ues);
        std::vector<bool> in_val(train_ues.size(), false);
        for (std::size_t i = 0; i < train_ues.size() && val_ues.size() < cfg.val_ues;
             i += stride) {
            val_ues.push_back(train_ues[i]);
            in_val[i] = true;
        }
        const std::size_t mstride =
            std::max<std::size_t>(1, train_ues.size() / (cfg.memory_ues + cfg.val_ues));
        std::vector<bool> taken = in_val;
        for (std::size_t i = 1; i < train_ues.size() && memory_ues.size() < cfg.memory_ues;
             i += mstride)
            if (!taken[i]) {
                memory_ues.push_back(train_ues[i]);
                taken[i] = true;
            }
        for (std::size_t i = 0; i < train_ues.size() && memory_ues.size() < cfg.memory_ues; ++i)
            if (!taken[i]) {
                memory_ues.push_back(train_ues[i]);
                taken[i] = true;
            }
    }

    const Codebook init = steered_dft_init(train_ues, n_t, cfg.k_beams);

    Codebook best = init;
    double best_obj = detail::codebook_objective(init, memory_ues, val_ues, cfg);

    Rng rng(mix_seed(0x636f6465ULL, cfg.seed));
    for (int restart = 0; restart < cfg.restarts; ++restart) {
        Codebook cur = init;
        if (restart > 0) {
            // jittered restart
            for (std::size_t c = 0; c < cur.k(); ++c) {
                std::vector<double> ph(n_t);
                for (std::size_t r = 0; r < n_t; ++r)
                    ph[r] = std::arg(cur.beams(r, c)) + rng.normal(0.0, cfg.phase_jitter);
                cur.beams.set_col(c, detail::phase_only_beam(ph));
            }
            if (gram_offdiag_energy(cur) > cfg.gram_bound ||
                detail::max_pairwise_coherence(cur) > cfg.max_coherence)
                cur = init;
        }
        double cur_obj = detail::codebook_objective(cur, memory_ues, val_ues, cfg);

        for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
            for (std::size_t beam = 0; beam < cur.k(); ++beam) {
                for (int cand = 0; cand < cfg.candidates_per_beam; ++cand) {
                    std::vector<double> ph(n_t);
                    if (cand == 0) {
                        // re-steer to a random grid direction
                        const double u = rng.uniform(-0.5, 0.5);
                        for (std::size_t r = 0; r < n_t; ++r)
                            ph[r] = 2.0 * M_PI * static_cast<double>(r) * u;
                    } else {
                        for (std::size_t r = 0; r < n_t; ++r)
                            ph[r] = std::arg(cur.beams(r, beam)) +
                                    rng.normal(0.0, cfg.phase_jitter);
                    }
                    Codebook trial = cur;
                    trial.beams.set_col(beam, detail::phase_only_beam(ph));
                    if (gram_offdiag_energy(trial) > cfg.gram_bound) continue;
                    if (detail::max_pairwise_coherence(trial) > cfg.max_coherence) continue;
                    const double obj =
                        detail::codebook_objective(trial, memory_ues, val_ues, cfg);
                    if (obj > cur_obj) {
                        cur = std::move(trial);
                        cur_obj = obj;
                    }
                }
            }
        }
        if (cur_obj > best_obj) {
            best = cur;
            best_obj = cur_obj;
        }
    }

    if (gram_offdiag_energy(best) > cfg.gram_bound)
        std::fprintf(stderr,
                     "learn_probing_codebook: warning: Gram energy bound %.3f not met (%.4f)\n",
                     cfg.gram_bound, gram_offdiag_energy(best));
    best.kind = CodebookKind::learned;
    best.constraint = BeamConstraint::phase_only;
    return best;
}

}  // namespace csifb
