#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "csifb/parametric.hpp"
#include "csifb/probing.hpp"
#include "csifb/subspace.hpp"

namespace csifb {

// Projector-labeled calibration memory and the gradient-free acquisition
// rule: cosine retrieval over normalized RSRP keys, multi-scale neighbor
// projector averaging, confidence-weighted fusion with the parametric
// branch, and rank-Q extraction of the fused covariance estimate.

struct CalibrationEntry {
    CalibrationKey key;
    std::vector<cplx> label_vec;  // unit eigenvector of the rank-1 direction projector
    int ue_id = 0;
};

struct CalibrationMemory {
    int site_id = 0;
    std::string codebook_id;
    std::vector<CalibrationEntry> entries;

    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }

    ComplexMatrix label_matrix(std::size_t i) const {
        const auto& v = entries[i].label_vec;
        ComplexMatrix p(v.size(), v.size());
        for (std::size_t r = 0; r < v.size(); ++r)
            for (std::size_t c = 0; c < v.size(); ++c) p(r, c) = v[r] * std::conj(v[c]);
        return p;
    }
};

enum class AlphaRule { adaptive_kappa, fixed };

struct FusionConfig {
    std::vector<std::size_t> neighborhood_sizes{5, 10, 20};
    AlphaRule alpha_rule = AlphaRule::adaptive_kappa;
    double fixed_alpha = 0.5;
    bool trace_normalize_branches = false;  // off = branches keep their native traces
    KeyDomain key_domain = KeyDomain::db;

    void validate() const {
        if (neighborhood_sizes.empty())
            throw std::invalid_argument("fusion config: empty neighborhood set");
        for (std::size_t i = 0; i < neighborhood_sizes.size(); ++i) {
            if (neighborhood_sizes[i] == 0)
                throw std::invalid_argument("fusion config: zero neighborhood size");
            if (i > 0 && neighborhood_sizes[i] < neighborhood_sizes[i - 1])
                throw std::invalid_argument("fusion config: sizes must be ascending");
        }
        if (fixed_alpha < 0.0 || fixed_alpha > 1.0)
            throw std::invalid_argument("fusion config: fixed alpha out of [0,1]");
    }
};

// Counts retrievals where m exceeded the memory and had to be clamped.
inline std::atomic<std::uint64_t>& retrieval_clamp_count() {
    static std::atomic<std::uint64_t> count{0};
    return count;
}

// Gain- and phase-invariant direction label h h^H / ||h||^2, stored as its
// unit eigenvector with the library-wide phase gauge.
inline std::vector<cplx> direction_label(const std::vector<cplx>& h) {
    const double n = vec_norm(h);
    if (n <= 0.0) throw std::invalid_argument("direction_label: zero channel");
    std::vector<cplx> v = h;
    for (auto& z : v) z /= n;
    ComplexMatrix col = ComplexMatrix::column(v);
    normalize_column_phases(col);
    return col.col(0);
}

inline CalibrationMemory build_memory(int site_id, const std::vector<UeChannel>& calib_ues,
                                      const Codebook& serving_codebook, double noise_sigma_db,
                                      KeyDomain key_domain, std::uint64_t seed,
                                      double tx_power_db = 40.0) {
    if (calib_ues.empty()) throw std::invalid_argument("build_memory: empty calibration set");
    CalibrationMemory mem;
    mem.site_id = site_id;
    mem.codebook_id = serving_codebook.id();
    mem.entries.reserve(calib_ues.size());
    for (std::size_t i = 0; i < calib_ues.size(); ++i) {
        const auto r = measure_rsrp(calib_ues[i], serving_codebook, noise_sigma_db,
                                    mix_seed(seed, i), tx_power_db);
        CalibrationEntry e;
        e.key = make_key(r, key_domain);
        e.label_vec = direction_label(calib_ues[i].h);
        e.ue_id = calib_ues[i].ue_id;
        mem.entries.push_back(std::move(e));
    }
    return mem;
}

// Indices of the m largest cosine similarities, descending; ties go to the
// lower entry index. m larger than the memory clamps (and is counted)
// instead of failing, so cold-start runs degrade gracefully.
inline std::vector<std::size_t> retrieve_neighbors(const CalibrationKey& query,
                                                   const CalibrationMemory& memory,
                                                   std::size_t m) {
    if (memory.empty()) throw std::invalid_argument("retrieve_neighbors: empty memory");
    if (m == 0) throw std::invalid_argument("retrieve_neighbors: m must be >= 1");
    if (m > memory.size()) {
        retrieval_clamp_count().fetch_add(1, std::memory_order_relaxed);
        m = memory.size();
    }
    std::vector<double> sim(memory.size());
    for (std::size_t i = 0; i < memory.size(); ++i)
        sim[i] = key_cosine(query, memory.entries[i].key);
    std::vector<std::size_t> order(memory.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
    order.resize(m);
    return order;
}

inline ComplexMatrix neighbor_projector_average(const CalibrationMemory& memory,
                                                const std::vector<std::size_t>& neighbors) {
    if (neighbors.empty())
        throw std::invalid_argument("neighbor_projector_average: empty neighbor list");
    const std::size_t n = memory.entries.front().label_vec.size();
    ComplexMatrix acc(n, n);
    for (std::size_t idx : neighbors) {
        const auto& v = memory.entries[idx].label_vec;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) acc(i, j) += v[i] * std::conj(v[j]);
    }
    acc *= 1.0 / static_cast<double>(neighbors.size());
    return symmetrize(acc);
}

// Retrieved labels of the widest neighborhood, with the per-label weight
// the multi-scale average assigns (sum of 1/(|S_m| * m) over every scale
// that still contains the label). Shared by the explicit average and the
// mixture fast path below.
inline std::vector<WeightedDirection> memory_mixture(const CalibrationKey& query,
                                                     const CalibrationMemory& memory,
                                                     const FusionConfig& cfg) {
    cfg.validate();
    if (memory.empty()) throw std::invalid_argument("memory_mixture: empty memory");
    std::vector<std::size_t> clamped;
    clamped.reserve(cfg.neighborhood_sizes.size());
    for (std::size_t m : cfg.neighborhood_sizes) clamped.push_back(std::min(m, memory.size()));
    const std::size_t widest_requested =
        *std::max_element(cfg.neighborhood_sizes.begin(), cfg.neighborhood_sizes.end());
    const auto neighbors = retrieve_neighbors(query, memory, widest_requested);

    const double scale_weight = 1.0 / static_cast<double>(cfg.neighborhood_sizes.size());
    std::vector<WeightedDirection> parts;
    parts.reserve(neighbors.size());
    for (std::size_t rank = 0; rank < neighbors.size(); ++rank) {
        double w = 0.0;
        for (std::size_t m : clamped)
            if (rank < m) w += scale_weight / static_cast<double>(m);
        parts.push_back({memory.entries[neighbors[rank]].label_vec, w});
    }
    return parts;
}

// Mean over the configured neighborhood sizes of the per-size projector
// averages; a trace-1 PSD local covariance estimate.
inline ComplexMatrix multiscale_average(const CalibrationKey& query,
                                        const CalibrationMemory& memory,
                                        const FusionConfig& cfg) {
    const auto parts = memory_mixture(query, memory, cfg);
    const std::size_t n = memory.entries.front().label_vec.size();
    return mixture_matrix(parts, n);
}

struct Confidence {
    double kappa = 0.0;
    double alpha = 0.0;
};

// kappa = clip(max cosine, 0, 1); alpha follows the configured rule. An
// empty memory reports (0, 0), forcing the pure parametric fallback.
inline Confidence confidence(const CalibrationKey& query, const CalibrationMemory& memory,
                             const FusionConfig& cfg) {
    cfg.validate();
    Confidence c;
    if (memory.empty()) return c;
    double best = -1.0;
    for (const auto& e : memory.entries) best = std::max(best, key_cosine(query, e.key));
    c.kappa = std::clamp(best, 0.0, 1.0);
    c.alpha = cfg.alpha_rule == AlphaRule::adaptive_kappa ? c.kappa : cfg.fixed_alpha;
    return c;
}

// (1-alpha) P_par + alpha P_mem. In the literal mix the branches keep their
// native traces (Q and 1); the result is a covariance estimate and is
// generally no longer idempotent. trace_normalize divides each branch by
// its trace first so the output has unit trace.
inline ComplexMatrix fuse(const ComplexMatrix& p_parametric, const ComplexMatrix& p_memory,
                          double alpha, const FusionConfig& cfg) {
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("fuse: alpha out of [0,1]");
    if (p_parametric.rows() != p_memory.rows() || p_parametric.cols() != p_memory.cols())
        throw std::invalid_argument("fuse: shape mismatch");
    ComplexMatrix par = p_parametric;
    ComplexMatrix mem = p_memory;
    if (cfg.trace_normalize_branches) {
        const double tp = trace(par).real();
        const double tm = trace(mem).real();
        if (tp <= 0.0 || tm <= 0.0) throw std::invalid_argument("fuse: non-positive branch trace");
        par *= 1.0 / tp;
        mem *= 1.0 / tm;
    }
    ComplexMatrix out = par * (1.0 - alpha) + mem * alpha;
    return symmetrize(out);
}

// MSE-optimal memory coefficient for two uncorrelated estimators. Exposed
// as a test oracle only; the serving rule uses alpha = kappa.
inline double optimal_alpha(double sigma2_par, double sigma2_mem) {
    if (sigma2_par < 0.0 || sigma2_mem < 0.0)
        throw std::invalid_argument("optimal_alpha: negative variance");
    if (sigma2_par == 0.0 && sigma2_mem == 0.0)
        throw std::invalid_argument("optimal_alpha: both variances zero");
    return sigma2_par / (sigma2_par + sigma2_mem);
}

struct AcquireResult {
    SubspaceDecision decision;
    double kappa = 0.0;
    double alpha = 0.0;
};

// End-to-end acquisition: key -> parametric projector + memory average ->
// confidence-weighted fuse -> rank-Q extraction. Model parameters are never
// touched. The eigenproblem runs on the explicit rank-1 mixture (parametric
// basis columns plus retrieved labels), which equals
// rank_q_extract(fuse(...), q) up to eigenvalue ties.
inline AcquireResult acquire_csi_subspace(const RsrpFingerprint& r, const BeamScorerModel& model,
                                          const Codebook& dictionary,
                                          const CalibrationMemory& memory,
                                          const FusionConfig& cfg, std::size_t q) {
    cfg.validate();
    if (!memory.empty() && memory.codebook_id != r.codebook_id)
        throw std::invalid_argument("acquire: fingerprint measured with a different codebook");
    if (!model.trained_codebook_id.empty() && model.trained_codebook_id != r.codebook_id)
        throw std::invalid_argument("acquire: model trained with a different codebook");

    AcquireResult out;
    const auto par = predict_subspace(r, model, dictionary, q);
    if (memory.empty()) {
        out.decision = par;
        out.decision.scheme_tag = "fused";
        return out;
    }

    const auto key = make_key(r, cfg.key_domain);
    const auto conf = confidence(key, memory, cfg);
    out.kappa = conf.kappa;
    out.alpha = conf.alpha;

    std::vector<WeightedDirection> parts;
    const double par_col_weight =
        cfg.trace_normalize_branches ? (1.0 - conf.alpha) / static_cast<double>(q)
                                     : (1.0 - conf.alpha);
    for (std::size_t c = 0; c < par.basis.cols(); ++c)
        parts.push_back({par.basis.col(c), par_col_weight});
    for (auto& part : memory_mixture(key, memory, cfg)) {
        part.weight *= conf.alpha;  // memory branch has unit trace already
        parts.push_back(std::move(part));
    }
    out.decision = rank_q_extract_mixture(parts, par.basis.rows(), q, "fused");
    return out;
}

}  // namespace csifb
