// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Criterion 12 re-runs the CLI binary (path in argv[1]) and
// byte-compares its outputs.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "csifb/runner.hpp"

using namespace csifb;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s — %s\n", pass ? "PASS" : "FAIL", id, name,
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

ComplexMatrix random_unit_norm_codebook(Rng& rng, std::size_t n, std::size_t k) {
    ComplexMatrix m(n, k);
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<cplx> col(n);
        for (auto& z : col) z = rng.complex_normal();
        const double nm = vec_norm(col);
        for (auto& z : col) z /= nm;
        m.set_col(c, col);
    }
    return m;
}

// ---- criterion 1: minimum-budget full-coverage sensing ---------------------
void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::string why;

    const double dft_energy = worst_case_sensing_energy(dft_codebook(64));
    if (std::fabs(dft_energy - 1.0) > 1e-9) {
        pass = false;
        why = fmt("dft energy %.3e", dft_energy);
    }

    Rng rng(0xacc1);
    for (int rep = 0; rep < 100 && pass; ++rep) {
        Codebook s;
        s.beams = random_unit_norm_codebook(rng, 64, 64);
        const double e = worst_case_sensing_energy(s);
        const double dev = frobenius_norm(s.beams * s.beams.adjoint() - ComplexMatrix::identity(64));
        if (e > 1.0 + 1e-9) {
            pass = false;
            why = fmt("square codebook energy %.12f > 1", e);
        }
        if (e >= 1.0 - 1e-9 && dev > 1e-6) {
            pass = false;
            why = fmt("equality without unitarity (dev %.2e)", dev);
        }
    }
    for (int rep = 0; rep < 100 && pass; ++rep) {
        Codebook s;
        s.beams = random_unit_norm_codebook(rng, 64, 16);
        const double e = worst_case_sensing_energy(s);
        if (e > 1e-9) {
            pass = false;
            why = fmt("K<N_t codebook energy %.3e > 1e-9", e);
        }
    }
    report(1, "full-coverage sensing optimum", pass,
           why.empty() ? fmt("dft energy 1%+.1e; 200 random codebooks within bounds; %.1fs",
                             dft_energy - 1.0, elapsed_s(t0))
                       : why + fmt("; %.1fs", elapsed_s(t0)));
}

// ---- criterion 2: direction-sample mean matches the closed-form covariance -
void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n_t = 32;
    SiteParams p;
    p.n_clusters = 4;
    p.min_cluster_separation = 0.15;
    p.paths_per_ue_min = 3;
    p.paths_per_ue_max = 3;
    p.min_path_separation = 2.0 / static_cast<double>(n_t);
    const auto site = sample_site(0xacc2, 0, p);

    double worst = 0.0;
    for (int g = 0; g < 10; ++g) {
        const auto geom = sample_ue_geometry(site, static_cast<std::uint64_t>(g), g);
        const auto target = ue_normalized_covariance(geom, n_t);
        ComplexMatrix acc(n_t, n_t);
        const int snaps = 100000;
        for (int i = 0; i < snaps; ++i) {
            const auto ch = sample_ue_channel(geom, n_t, mix_seed(g, i));
            const double nm2 = std::pow(vec_norm(ch.h), 2);
            for (std::size_t a = 0; a < n_t; ++a)
                for (std::size_t b = 0; b < n_t; ++b)
                    acc(a, b) += ch.h[a] * std::conj(ch.h[b]) / nm2;
        }
        acc *= 1.0 / snaps;
        worst = std::max(worst, frobenius_norm(acc - target));
    }
    report(2, "direction-projector mean vs closed-form covariance", worst <= 0.03,
           fmt("worst Frobenius deviation %.4f (bound 0.03) over 10 geometries; %.1fs", worst,
               elapsed_s(t0)));
}

// ---- criterion 3: neighbor averaging error shrinks with calibration size ---
void criterion_3() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n_t = 32;
    const std::vector<int> sizes{100, 400, 1600};
    const std::vector<std::size_t> ms{10, 20, 40};  // ceil(sqrt(size))

    SiteParams p;
    p.n_clusters = 4;
    p.min_cluster_separation = 0.1;
    p.spread_min = 0.002;
    p.spread_max = 0.006;
    p.paths_per_ue_min = 2;
    p.paths_per_ue_max = 3;
    p.min_path_separation = 2.0 / static_cast<double>(n_t);
    const auto site = sample_site(0xacc3, 0, p);

    // K = 16 evenly spaced DFT-32 beams as the key codebook
    Codebook keys;
    keys.kind = CodebookKind::dft_sub;
    keys.constraint = BeamConstraint::phase_only;
    {
        const auto full = dft_codebook(n_t);
        std::vector<std::size_t> pick;
        for (std::size_t i = 0; i < 16; ++i) pick.push_back(i * 2);
        keys.beams = full.beams.columns(pick);
    }

    const int n_queries = 20;
    std::vector<UeGeometry> queries;
    for (int q = 0; q < n_queries; ++q)
        queries.push_back(sample_ue_geometry(site, 90000 + q, q));

    std::vector<double> err(sizes.size(), 0.0);
    for (int seed = 0; seed < 3; ++seed) {
        // one nested memory pool per seed
        std::vector<UeChannel> pool;
        for (int i = 0; i < sizes.back(); ++i) {
            const auto geom = sample_ue_geometry(site, mix_seed(seed, i), i);
            pool.push_back(sample_ue_channel(geom, n_t, mix_seed(7000 + seed, i)));
        }
        for (std::size_t si = 0; si < sizes.size(); ++si) {
            std::vector<UeChannel> subset(pool.begin(), pool.begin() + sizes[si]);
            const auto mem = build_memory(0, subset, keys, 0.0, KeyDomain::linear,
                                          mix_seed(99, seed));
            FusionConfig fus;
            fus.neighborhood_sizes = {ms[si]};
            fus.key_domain = KeyDomain::linear;
            double qerr = 0.0;
            for (int q = 0; q < n_queries; ++q) {
                const auto target = ue_normalized_covariance(queries[q], n_t);
                const auto ch = sample_ue_channel(queries[q], n_t, mix_seed(800 + seed, q));
                const auto r = measure_rsrp(ch, keys, 0.0, mix_seed(600 + seed, q));
                const auto est = multiscale_average(make_key(r, KeyDomain::linear), mem, fus);
                qerr += frobenius_norm(est - target);
            }
            err[si] += qerr / n_queries / 3.0;
        }
    }
    int inversions = 0;
    double worst_inv = 0.0;
    for (std::size_t i = 1; i < err.size(); ++i)
        if (err[i] > err[i - 1]) {
            ++inversions;
            worst_inv = std::max(worst_inv, err[i] - err[i - 1]);
        }
    const bool pass = inversions == 0 || (inversions == 1 && worst_inv <= 0.005);
    report(3, "covariance-estimation error vs calibration size", pass,
           fmt("errors {%.4f, %.4f, %.4f}; inversions %d (worst %.4f); %.1fs", err[0], err[1],
               err[2], inversions, worst_inv, elapsed_s(t0)));
}

// ---- criterion 4: capture-power loss bound and trace optimality ------------
void criterion_4() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(0xacc4);
    const std::size_t n = 16, q = 4;
    bool pass = true;
    std::string why;
    for (int rep = 0; rep < 1000 && pass; ++rep) {
        ComplexMatrix g(n, n);
        for (auto& z : g.data()) z = rng.complex_normal();
        const auto a_mix = symmetrize(g);
        ComplexMatrix w(n, n);
        for (auto& z : w.data()) z = rng.complex_normal();
        auto r_true = symmetrize(w * w.adjoint());
        r_true *= 1.0 / trace(r_true).real();

        const auto [loss, bound] = kyfan_loss_and_bound(a_mix, r_true, q);
        if (loss < -1e-8 || loss > bound + 1e-8) {
            pass = false;
            why = fmt("loss %.3e outside [0, %.3e]", loss, bound);
            break;
        }
        const auto best = rank_q_extract(a_mix, q);
        const double best_trace = trace(best.projector * a_mix).real();
        for (int c = 0; c < 200; ++c) {
            ComplexMatrix u(n, q);
            for (auto& z : u.data()) z = rng.complex_normal();
            const auto comp = projector_from_basis(u);
            if (best_trace < trace(comp * a_mix).real() - 1e-9) {
                pass = false;
                why = "random competitor beat the dominant eigenspace on tr(PA)";
                break;
            }
        }
    }
    report(4, "rank-Q extraction bound and optimality sweep", pass,
           (why.empty() ? std::string("1000 pairs x 200 competitors all within bounds")
                        : why) +
               fmt("; %.1fs", elapsed_s(t0)));
}

// ---- criterion 5: grid-searched fusion weight matches the closed form ------
void criterion_5() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = 16;
    bool pass = true;
    std::string detail;
    Rng rng(0xacc5);
    for (double ratio : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const double s2p = 0.04, s2m = 0.04 * ratio;
        double acc_a = 0.0, acc_b = 0.0, acc_c = 0.0;
        const int samples = 10000;
        for (int i = 0; i < samples; ++i) {
            ComplexMatrix gp(n, n), gm(n, n);
            for (auto& z : gp.data()) z = rng.complex_normal();
            for (auto& z : gm.data()) z = rng.complex_normal();
            auto ep = symmetrize(gp);
            auto em = symmetrize(gm);
            ep *= std::sqrt(s2p) / frobenius_norm(ep);
            em *= std::sqrt(s2m) / frobenius_norm(em);
            acc_a += std::pow(frobenius_norm(ep), 2);
            acc_b += std::pow(frobenius_norm(em), 2);
            acc_c += trace(ep * em).real();
        }
        acc_a /= samples;
        acc_b /= samples;
        acc_c /= samples;
        double best_alpha = 0.0, best_mse = 1e300;
        for (int gidx = 0; gidx <= 1000; ++gidx) {
            const double a = gidx / 1000.0;
            const double mse =
                (1 - a) * (1 - a) * acc_a + a * a * acc_b + 2 * a * (1 - a) * acc_c;
            if (mse < best_mse) {
                best_mse = mse;
                best_alpha = a;
            }
        }
        const double closed = optimal_alpha(s2p, s2m);
        if (std::fabs(best_alpha - closed) > 0.01) {
            pass = false;
            detail += fmt("[ratio %.2f: grid %.3f vs %.3f] ", ratio, best_alpha, closed);
        }
    }
    report(5, "MSE-optimal fusion weight grid search", pass,
           (pass ? std::string("5 variance ratios within 0.01") : detail) +
               fmt("; %.1fs", elapsed_s(t0)));
}

// ---- criteria 6..10 share the desk-scale LOCO configuration ----------------
struct LocoOutputs {
    ExperimentConfig cfg;
    std::vector<SiteData> sites;
    std::vector<MetricsRecord> records;
    ArtifactStore store;
};

double agg_eta(const std::vector<MetricsRecord>& recs, const std::string& scheme, int budget,
               int site = -1) {
    double acc = 0.0;
    int n = 0;
    for (const auto& r : recs)
        if (r.scheme_tag == scheme && r.budget == budget && (site < 0 || r.site_id == site) &&
            r.n_eval_ues > 0) {
            acc += r.mean_eta;
            ++n;
        }
    return n > 0 ? acc / n : 0.0;
}

void criterion_6(const LocoOutputs& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& cfg = out.cfg;
    const auto dict = dft_dictionary(cfg.n_t, cfg.dict_oversample);
    const auto dft = dft_codebook(cfg.n_t);
    bool pass = true;
    std::string detail;
    for (int s = 0; s < cfg.n_sites; ++s) {
        std::vector<double> eta_sel(cfg.n_eval_ues), eta_omp(cfg.n_eval_ues);
        const auto evals = eval_ids(cfg);
        parallel_for(evals.size(), cfg.threads, [&](std::size_t e) {
            const auto ch = channel_of(cfg, out.sites[s], evals[e],
                                       seeds::chan(1, seeds::kEvalChan, s, evals[e]));
            eta_sel[e] =
                capture_efficiency_basis(dft_select(ch.h, cfg.q_rank, dft).basis, ch.h);
            eta_omp[e] =
                capture_efficiency_basis(omp_subspace(ch.h, dict, cfg.q_rank).basis, ch.h);
        });
        double ms = 0.0, mo = 0.0;
        for (std::size_t e = 0; e < evals.size(); ++e) {
            ms += eta_sel[e];
            mo += eta_omp[e];
        }
        ms /= evals.size();
        mo /= evals.size();
        detail += fmt("site%d omp %.4f sel %.4f; ", s, mo, ms);
        if (mo < ms || ms < 0.5 || mo < 0.5) pass = false;
    }
    report(6, "oversampled OMP vs orthogonal selection ordering", pass,
           detail + fmt("%.1fs", elapsed_s(t0)));
}

void criterion_7(const LocoOutputs& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& cfg = out.cfg;
    bool pass = true;
    std::string detail;
    for (int s = 0; s < cfg.n_sites; ++s) {
        std::vector<double> traj;
        for (int b : cfg.budgets) traj.push_back(agg_eta(out.records, "fused", b, s));
        int inversions = 0;
        double worst = 0.0;
        for (std::size_t i = 1; i < traj.size(); ++i)
            if (traj[i] < traj[i - 1]) {
                ++inversions;
                worst = std::max(worst, traj[i - 1] - traj[i]);
            }
        detail += fmt("site%d {%.4f %.4f %.4f}; ", s, traj[0], traj[1], traj[2]);
        if (!(inversions == 0 || (inversions == 1 && worst <= 0.005))) pass = false;
    }
    const int bmax = cfg.budgets.back();
    const double fused_max = agg_eta(out.records, "fused", bmax);
    const double par = agg_eta(out.records, "parametric", bmax);
    detail += fmt("fused@%d %.4f vs parametric %.4f + 0.005", bmax, fused_max, par);
    if (fused_max < par + 0.005) pass = false;
    report(7, "budget monotonicity and gain over the parametric prior", pass,
           detail + fmt("; %.1fs (shared run)", elapsed_s(t0)));
}

void criterion_8(const LocoOutputs& out) {
    bool pass = true;
    std::string detail;
    for (int b : out.cfg.budgets) {
        const double fused = agg_eta(out.records, "fused", b);
        const double mem = agg_eta(out.records, "memory", b);
        const double par = agg_eta(out.records, "parametric", b);
        const double margin = fused - std::max(mem, par) + 0.01;
        detail += fmt("b%d margin %+.4f; ", b, margin);
        if (margin < 0.0) pass = false;
    }
    report(8, "fusion dominates both single branches", pass, detail);
}

void criterion_9(LocoOutputs& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = run_effective_rate(out.cfg, out.sites, &out.store);
    const double fused0 = [&] {
        double acc = 0.0;
        int n = 0;
        for (const auto& r : rep.records)
            if (r.scheme_tag == "fused" && r.budget == 0) {
                acc += r.mean_rate;
                ++n;
            }
        return acc / std::max(1, n);
    }();
    const double conv0 = [&] {
        double acc = 0.0;
        int n = 0;
        for (const auto& r : rep.records)
            if (r.scheme_tag == "conv_t2_omp" && r.budget == 0) {
                acc += r.mean_rate;
                ++n;
            }
        return acc / std::max(1, n);
    }();
    const bool no_crossing_at_zero = fused0 <= conv0;
    const bool pass = rep.crossed && rep.crossing_budget > 0 && no_crossing_at_zero;
    report(9, "effective-rate crossing under overhead accounting", pass,
           fmt("crossing at budget %d; budget-0 rates fused %.3f vs reference %.3f; %.1fs",
               rep.crossing_budget, fused0, conv0, elapsed_s(t0)));
}

void criterion_10(const LocoOutputs& out) {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    double worst_gram = 0.0, worst_coh = 0.0;
    for (const auto& [key, art] : out.store.by_target_seed) {
        const double gram = gram_offdiag_energy(art.codebook);
        worst_gram = std::max(worst_gram, gram);
        for (std::size_t i = 0; i < art.codebook.k(); ++i)
            for (std::size_t j = i + 1; j < art.codebook.k(); ++j)
                worst_coh = std::max(worst_coh, std::abs(vec_dot(art.codebook.beams.col(i),
                                                                 art.codebook.beams.col(j))));
    }
    if (worst_gram > 0.05 || worst_coh >= 0.99) pass = false;
    report(10, "learned probing codebook quality", pass,
           fmt("worst Gram energy %.4f (bound 0.05, reported reference magnitude 0.0132); worst "
               "coherence %.3f; %zu codebooks; %.1fs",
               worst_gram, worst_coh, out.store.by_target_seed.size(), elapsed_s(t0)));
}

void criterion_11() {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::string why;

    // eigensolver reconstruction
    Rng rng(0xacc11);
    double worst_rec = 0.0;
    for (int rep = 0; rep < 500; ++rep) {
        const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 64));
        ComplexMatrix g(n, n);
        for (auto& z : g.data()) z = rng.complex_normal();
        const auto a = symmetrize(g);
        const auto e = hermitian_eig(a);
        ComplexMatrix lam(n, n);
        for (std::size_t i = 0; i < n; ++i) lam(i, i) = e.eigenvalues[i];
        const double rec =
            frobenius_norm(e.eigenvectors * lam * e.eigenvectors.adjoint() - a) /
            frobenius_norm(a);
        worst_rec = std::max(worst_rec, rec);
    }
    if (worst_rec > 1e-8) {
        pass = false;
        why += fmt("[eig reconstruction %.2e] ", worst_rec);
    }

    // analytic vs finite-difference gradients
    Mlp m = Mlp::init({6, 8, 7, 5}, 0xacc12);
    std::vector<std::vector<double>> xs, ys;
    Rng grng(0xacc13);
    for (int b = 0; b < 4; ++b) {
        std::vector<double> x(6), y(5);
        for (auto& v : x) v = grng.normal();
        for (auto& v : y) v = grng.uniform() < 0.4 ? 1.0 : 0.0;
        xs.push_back(x);
        ys.push_back(y);
    }
    MlpGrad grad = MlpGrad::zeros_like(m);
    mlp_loss_and_grad(m, xs, ys, &grad);
    double worst_rel = 0.0;
    const double step = 1e-5;
    for (std::size_t l = 0; l < m.n_layers(); ++l)
        for (std::size_t i = 0; i < m.weights[l].size(); i += 3) {
            const double orig = m.weights[l][i];
            m.weights[l][i] = orig + step;
            const double up = mlp_loss_and_grad(m, xs, ys, nullptr);
            m.weights[l][i] = orig - step;
            const double dn = mlp_loss_and_grad(m, xs, ys, nullptr);
            m.weights[l][i] = orig;
            const double fd = (up - dn) / (2.0 * step);
            const double g = grad.weights[l][i];
            const double denom = std::max(std::fabs(fd), std::fabs(g));
            if (denom > 1e-10) worst_rel = std::max(worst_rel, std::fabs(fd - g) / denom);
        }
    if (worst_rel > 1e-4) {
        pass = false;
        why += fmt("[gradcheck rel %.2e] ", worst_rel);
    }

    // OMP against exhaustive pair search
    const auto dict = dft_dictionary(8, 4);
    Rng orng(0xacc14);
    double worst_gap = 0.0;
    for (int rep = 0; rep < 40; ++rep) {
        std::vector<cplx> h(8);
        for (auto& z : h) z = orng.complex_normal();
        const double eta_omp =
            capture_efficiency_basis(omp_subspace(h, dict, 2).basis, h);
        double best = 0.0;
        for (std::size_t i = 0; i < dict.k(); ++i)
            for (std::size_t j = i + 1; j < dict.k(); ++j) {
                ComplexMatrix pair(8, 2);
                pair.set_col(0, dict.beams.col(i));
                pair.set_col(1, dict.beams.col(j));
                try {
                    best = std::max(best, capture_efficiency_basis(orthonormalize(pair), h));
                } catch (const std::invalid_argument&) {
                }
            }
        worst_gap = std::max(worst_gap, best - eta_omp);
    }
    if (worst_gap > 0.1) {
        pass = false;
        why += fmt("[omp gap %.3f] ", worst_gap);
    }

    report(11, "numerical bedrock (eig, gradients, greedy search)", pass,
           (why.empty() ? fmt("eig %.1e; gradcheck %.1e; omp gap %.3f", worst_rec, worst_rel,
                              worst_gap)
                        : why) +
               fmt("; %.1fs", elapsed_s(t0)));
}

void criterion_12(const std::string& harness_path) {
    const auto t0 = std::chrono::steady_clock::now();
    if (harness_path.empty()) {
        report(12, "CLI determinism", false, "no harness binary path given (argv[1])");
        return;
    }
    const std::string d1 = "acceptance_det_run1";
    const std::string d2 = "acceptance_det_run2";
    fs::remove_all(d1);
    fs::remove_all(d2);
    const std::string base = "\"" + harness_path + "\" all --tiny --seed 7 --out ";
    const int rc1 = std::system((base + d1 + " > /dev/null 2>&1").c_str());
    const int rc2 = std::system((base + d2 + " > /dev/null 2>&1").c_str());
    bool pass = rc1 == 0 && rc2 == 0;
    std::string detail = fmt("exit codes %d/%d", rc1, rc2);
    if (pass) {
        for (const char* f : {"eval.csv", "ablate_adaptation.csv", "ablate_keys.csv", "rate.csv"}) {
            std::ifstream a(d1 + "/" + f, std::ios::binary);
            std::ifstream b(d2 + "/" + f, std::ios::binary);
            std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
            std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
            if (sa.empty() || sa != sb) {
                pass = false;
                detail += fmt("; %s differs", f);
            }
        }
        if (pass) detail += "; all four CSVs byte-identical";
    }
    report(12, "CLI determinism", pass, detail + fmt("; %.1fs", elapsed_s(t0)));
}

}  // namespace

int main(int argc, char** argv) {
    const std::string harness_path = argc > 1 ? argv[1] : "";

    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_11();

    // shared desk-scale LOCO run for criteria 6-10
    LocoOutputs out;
    out.cfg = ExperimentConfig{};
    out.cfg.threads = 0;
    out.cfg.validate();
    out.sites = build_sites(out.cfg);
    criterion_6(out);
    {
        const auto t0 = std::chrono::steady_clock::now();
        out.records = run_loco(out.cfg, out.sites, &out.store);
        std::printf("       (LOCO sweep: %d sites x %zu seeds x %zu budgets in %.0fs)\n",
                    out.cfg.n_sites, out.cfg.seeds.size(), out.cfg.budgets.size(),
                    elapsed_s(t0));
    }
    criterion_7(out);
    criterion_8(out);
    criterion_9(out);
    criterion_10(out);

    criterion_12(harness_path);

    std::printf("%d of 12 criteria passed\n", 12 - g_failures);
    return g_failures;
}
