#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "csifb/numerics.hpp"
#include "csifb/rng.hpp"

namespace csifb {

// Synthetic multi-site geometric channel generator. Each site is a mixture
// of angular clusters in spatial frequency u in [-0.5, 0.5); UEs draw a few
// near-orthogonal paths around those clusters and Rayleigh path gains per
// snapshot. Stands in for ray-traced deployment data.

// Circular distance on the spatial-frequency torus (period 1).
inline double spatial_freq_distance(double a, double b) {
    double d = std::fabs(a - b);
    d -= std::floor(d);
    return std::min(d, 1.0 - d);
}

inline double wrap_spatial_freq(double u) {
    u -= std::floor(u + 0.5);
    return u;
}

struct SiteParams {
    int n_clusters = 3;
    double min_cluster_separation = 0.08;
    double spread_min = 0.002;
    double spread_max = 0.006;
    // When non-empty, cluster centers are a per-site subset of this shared
    // direction pool plus a small jitter, instead of fresh uniform draws.
    // Deployments then share coarse angular structure while every site
    // keeps its own support, spreads and weights.
    std::vector<double> shared_direction_pool;
    double pool_jitter = 0.004;
    int paths_per_ue_min = 2;
    int paths_per_ue_max = 3;
    double shadowing_log_variance = 1.0;  // dB^2
    double min_path_separation = 0.0;     // 0 => 2/n_t chosen by caller
    // log-normal tilt of per-path mean powers; 0 keeps paths equal-power,
    // which also keeps the direction-projector mean close to the closed-form
    // covariance (the concentration premise degrades fast with imbalance)
    double path_power_tilt = 0.0;
};

struct SitePropagationModel {
    int site_id = 0;
    std::vector<double> cluster_centers;         // u in [-0.5, 0.5)
    std::vector<double> cluster_angular_spread;  // std dev of u per cluster
    std::vector<double> cluster_power_fractions; // nonnegative, sum 1
    int paths_per_ue_min = 2;
    int paths_per_ue_max = 3;
    double shadowing_log_variance = 1.0;  // dB^2
    double min_path_separation = 0.03125;
    double path_power_tilt = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (cluster_centers.empty()) throw std::invalid_argument("site: no clusters");
        if (cluster_centers.size() != cluster_angular_spread.size() ||
            cluster_centers.size() != cluster_power_fractions.size())
            throw std::invalid_argument("site: cluster arrays disagree in length");
        double sum = 0.0;
        for (double f : cluster_power_fractions) {
            if (f < 0.0) throw std::invalid_argument("site: negative power fraction");
            sum += f;
        }
        if (std::fabs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("site: power fractions must sum to 1");
        for (double s : cluster_angular_spread)
            if (s <= 0.0) throw std::invalid_argument("site: spread must be positive");
        for (double u : cluster_centers)
            if (u < -0.5 || u >= 0.5) throw std::invalid_argument("site: center out of range");
        if (paths_per_ue_min < 1 || paths_per_ue_max < paths_per_ue_min)
            throw std::invalid_argument("site: bad paths_per_ue range");
    }
};

struct UeGeometry {
    int ue_id = 0;
    std::vector<double> path_spatial_frequencies;
    std::vector<double> path_mean_powers;  // relative, sum 1
    double large_scale_gain = 1.0;         // linear
};

struct UeChannel {
    int ue_id = 0;
    std::vector<cplx> h;
    std::uint64_t snapshot_seed = 0;
};

// entry n = (1/sqrt(n_t)) exp(j 2 pi n u)
inline std::vector<cplx> steering_vector(double u, std::size_t n_t) {
    if (n_t < 1) throw std::invalid_argument("steering_vector: n_t must be >= 1");
    std::vector<cplx> a(n_t);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_t));
    for (std::size_t n = 0; n < n_t; ++n) {
        const double ang = 2.0 * M_PI * static_cast<double>(n) * u;
        a[n] = scale * cplx{std::cos(ang), std::sin(ang)};
    }
    return a;
}

inline SitePropagationModel sample_site(std::uint64_t seed, int site_id, const SiteParams& p) {
    if (p.n_clusters < 1) throw std::invalid_argument("sample_site: need at least one cluster");
    if (static_cast<double>(p.n_clusters) * p.min_cluster_separation > 1.0)
        throw std::invalid_argument("sample_site: separation constraints infeasible");

    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(site_id)));
    SitePropagationModel site;
    site.site_id = site_id;
    site.seed = seed;
    site.paths_per_ue_min = p.paths_per_ue_min;
    site.paths_per_ue_max = p.paths_per_ue_max;
    site.shadowing_log_variance = p.shadowing_log_variance;
    site.min_path_separation = p.min_path_separation;
    site.path_power_tilt = p.path_power_tilt;

    if (!p.shared_direction_pool.empty() &&
        static_cast<int>(p.shared_direction_pool.size()) < p.n_clusters)
        throw std::invalid_argument("sample_site: direction pool smaller than cluster count");

    const int max_tries = 20000;
    int tries = 0;
    while (static_cast<int>(site.cluster_centers.size()) < p.n_clusters) {
        if (++tries > max_tries)
            throw std::invalid_argument("sample_site: separation constraints infeasible");
        double u;
        if (p.shared_direction_pool.empty()) {
            u = rng.uniform(-0.5, 0.5);
        } else {
            const auto pick = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<long>(p.shared_direction_pool.size()) - 1));
            u = wrap_spatial_freq(p.shared_direction_pool[pick] +
                                  rng.uniform(-p.pool_jitter, p.pool_jitter));
        }
        bool ok = true;
        for (double c : site.cluster_centers)
            if (spatial_freq_distance(u, c) < p.min_cluster_separation) {
                ok = false;
                break;
            }
        if (ok) site.cluster_centers.push_back(u);
    }
    double total = 0.0;
    for (int c = 0; c < p.n_clusters; ++c) {
        site.cluster_angular_spread.push_back(rng.uniform(p.spread_min, p.spread_max));
        const double w = 0.3 + rng.uniform();  // keep every cluster non-negligible
        site.cluster_power_fractions.push_back(w);
        total += w;
    }
    for (double& w : site.cluster_power_fractions) w /= total;
    site.validate();
    return site;
}

inline UeGeometry sample_ue_geometry(const SitePropagationModel& site, std::uint64_t ue_seed,
                                     int ue_id = 0) {
    site.validate();
    Rng rng(mix_seed(site.seed ^ 0x75650000ULL, ue_seed));
    UeGeometry geom;
    geom.ue_id = ue_id;
    const int n_paths =
        static_cast<int>(rng.uniform_int(site.paths_per_ue_min, site.paths_per_ue_max));

    const int retry_cap = 2000;
    int tries = 0;
    std::vector<int> path_cluster;
    while (static_cast<int>(geom.path_spatial_frequencies.size()) < n_paths) {
        if (++tries > retry_cap)
            throw std::runtime_error("sample_ue_geometry: path separation retry cap exceeded");
        // cluster chosen proportional to power fractions
        const double x = rng.uniform();
        double acc = 0.0;
        int cluster = 0;
        for (std::size_t c = 0; c < site.cluster_power_fractions.size(); ++c) {
            acc += site.cluster_power_fractions[c];
            if (x < acc) {
                cluster = static_cast<int>(c);
                break;
            }
        }
        const double u = wrap_spatial_freq(
            rng.normal(site.cluster_centers[cluster], site.cluster_angular_spread[cluster]));
        bool ok = true;
        for (double v : geom.path_spatial_frequencies)
            if (spatial_freq_distance(u, v) < site.min_path_separation) {
                ok = false;
                break;
            }
        if (!ok) continue;
        geom.path_spatial_frequencies.push_back(u);
        path_cluster.push_back(cluster);
    }

    // Relative path powers: equal unless a tilt is configured. Cluster
    // weighting already happened through the cluster draw above.
    double total = 0.0;
    for (int ell = 0; ell < n_paths; ++ell) {
        const double w = site.path_power_tilt > 0.0
                             ? std::exp(site.path_power_tilt * rng.normal())
                             : 1.0;
        geom.path_mean_powers.push_back(w);
        total += w;
    }
    for (double& w : geom.path_mean_powers) w /= total;

    const double sigma_sh_db = std::sqrt(site.shadowing_log_variance);
    geom.large_scale_gain = std::pow(10.0, sigma_sh_db * rng.normal() / 10.0);
    return geom;
}

inline UeChannel sample_ue_channel(const UeGeometry& geom, std::size_t n_t,
                                   std::uint64_t snapshot_seed) {
    if (geom.path_spatial_frequencies.empty())
        throw std::invalid_argument("sample_ue_channel: geometry has no paths");
    if (geom.large_scale_gain <= 0.0)
        throw std::invalid_argument("sample_ue_channel: large-scale gain must be > 0");
    Rng rng(mix_seed(0x736e6170ULL, snapshot_seed));
    UeChannel ch;
    ch.ue_id = geom.ue_id;
    ch.snapshot_seed = snapshot_seed;
    ch.h.assign(n_t, cplx{0.0, 0.0});
    const double g = std::sqrt(geom.large_scale_gain);
    for (std::size_t ell = 0; ell < geom.path_spatial_frequencies.size(); ++ell) {
        const cplx alpha = std::sqrt(geom.path_mean_powers[ell]) * rng.complex_normal();
        const auto a = steering_vector(geom.path_spatial_frequencies[ell], n_t);
        for (std::size_t n = 0; n < n_t; ++n) ch.h[n] += g * alpha * a[n];
    }
    return ch;
}

// Closed form under the path model: sum_l sigma_l^2 a a^H / sum_l sigma_l^2.
inline ComplexMatrix ue_normalized_covariance(const UeGeometry& geom, std::size_t n_t) {
    if (geom.path_spatial_frequencies.empty())
        throw std::invalid_argument("ue_normalized_covariance: geometry has no paths");
    ComplexMatrix r(n_t, n_t);
    double total = 0.0;
    for (std::size_t ell = 0; ell < geom.path_spatial_frequencies.size(); ++ell) {
        const auto a = steering_vector(geom.path_spatial_frequencies[ell], n_t);
        const double w = geom.path_mean_powers[ell];
        for (std::size_t i = 0; i < n_t; ++i)
            for (std::size_t j = 0; j < n_t; ++j) r(i, j) += w * a[i] * std::conj(a[j]);
        total += w;
    }
    r *= 1.0 / total;
    return symmetrize(r);
}

}  // namespace csifb
