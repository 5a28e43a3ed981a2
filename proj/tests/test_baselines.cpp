#include <catch2/catch.hpp>

#include "csifb/baselines.hpp"
#include "csifb/channel.hpp"
#include "support.hpp"

using namespace csifb;

TEST_CASE("dft_select: on-grid alignment and Parseval oracle") {
    const std::size_t n = 16;
    // on-grid single path: u = k/n matches DFT column (n-k) mod n
    const auto h = steering_vector(3.0 / 16.0, n);
    const auto dec = dft_select(h, 1);
    CHECK(capture_efficiency(dec.projector, h) == Approx(1.0).margin(1e-10));
    testsup::require_valid_projector(dec.projector, 1);

    Rng rng(1);
    std::vector<cplx> hr(n);
    for (auto& z : hr) z = rng.complex_normal();

    // complete basis keeps everything
    const auto full = dft_select(hr, n);
    CHECK(capture_efficiency(full.projector, hr) == Approx(1.0).margin(1e-9));

    // Parseval oracle: eta = sum of Q largest |coefficient|^2 / ||h||^2
    const auto dft = dft_codebook(n);
    auto coef = adjoint_vec(dft.beams, hr);
    std::vector<double> mag(n);
    for (std::size_t i = 0; i < n; ++i) mag[i] = std::norm(coef[i]);
    std::sort(mag.rbegin(), mag.rend());
    const double expect = (mag[0] + mag[1] + mag[2] + mag[3]) / std::pow(vec_norm(hr), 2);
    const auto d4 = dft_select(hr, 4);
    CHECK(capture_efficiency(d4.projector, hr) == Approx(expect).margin(1e-10));
}

TEST_CASE("omp_select: exact recovery cases") {
    const std::size_t n = 16;
    const auto dict = dft_dictionary(n, 2);

    // h equal to one dictionary column
    const auto h = dict.beams.col(7);
    const auto sel = omp_select(h, dict, 1);
    REQUIRE(sel.indices.size() == 1);
    CHECK(sel.indices[0] == 7);
    CHECK(sel.residual_norms[0] <= 1e-12);

    // 2-sparse combination of orthogonal columns (even indices are the DFT grid)
    std::vector<cplx> h2(n);
    const auto c1 = dict.beams.col(4);
    const auto c2 = dict.beams.col(12);
    for (std::size_t i = 0; i < n; ++i) h2[i] = 2.0 * c1[i] + cplx{0.0, 1.0} * c2[i];
    const auto dec = omp_subspace(h2, dict, 2);
    CHECK(capture_efficiency(dec.projector, h2) == Approx(1.0).margin(1e-10));
    testsup::require_valid_projector(dec.projector, 2);
}

TEST_CASE("omp_select: residual norms non-increasing, eta identity") {
    Rng rng(2);
    const std::size_t n = 16;
    const auto dict = dft_dictionary(n, 4);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<cplx> h(n);
        for (auto& z : h) z = rng.complex_normal();
        const auto sel = omp_select(h, dict, 4);
        for (std::size_t i = 1; i < sel.residual_norms.size(); ++i)
            CHECK(sel.residual_norms[i] <= sel.residual_norms[i - 1] + 1e-12);
        const double res = sel.residual_norms.back();
        const double eta = capture_efficiency_basis(sel.basis, h);
        CHECK(eta == Approx(1.0 - res * res / std::pow(vec_norm(h), 2)).margin(1e-10));
    }
}

TEST_CASE("omp_subspace tracks the exhaustive best pair at desk scale") {
    const std::size_t n = 8;
    const auto dict = dft_dictionary(n, 4);  // 32 columns
    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<cplx> h(n);
        for (auto& z : h) z = rng.complex_normal();
        const auto omp = omp_subspace(h, dict, 2);
        const double eta_omp = capture_efficiency(omp.projector, h);
        double best = 0.0;
        for (std::size_t i = 0; i < dict.k(); ++i)
            for (std::size_t j = i + 1; j < dict.k(); ++j) {
                ComplexMatrix pair(n, 2);
                pair.set_col(0, dict.beams.col(i));
                pair.set_col(1, dict.beams.col(j));
                double eta = 0.0;
                try {
                    eta = capture_efficiency_basis(orthonormalize(pair), h);
                } catch (const std::invalid_argument&) {
                    continue;  // numerically dependent pair
                }
                best = std::max(best, eta);
            }
        CHECK(eta_omp >= best - 0.1);
    }
}

TEST_CASE("omp beats dft_select on average over random channels") {
    const std::size_t n = 32;
    const auto dict = dft_dictionary(n, 4);
    SiteParams p;
    p.n_clusters = 3;
    p.min_cluster_separation = 0.1;
    p.paths_per_ue_min = 2;
    p.paths_per_ue_max = 3;
    p.min_path_separation = 2.0 / n;
    const auto site = sample_site(4, 0, p);
    double sum_omp = 0.0, sum_sel = 0.0;
    const int n_ues = 120;
    for (int i = 0; i < n_ues; ++i) {
        const auto geom = sample_ue_geometry(site, static_cast<std::uint64_t>(i));
        const auto ch = sample_ue_channel(geom, n, static_cast<std::uint64_t>(1000 + i));
        sum_omp += capture_efficiency(omp_subspace(ch.h, dict, 4).projector, ch.h);
        sum_sel += capture_efficiency(dft_select(ch.h, 4).projector, ch.h);
    }
    CHECK(sum_omp / n_ues >= sum_sel / n_ues - 1e-9);
}
