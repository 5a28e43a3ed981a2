#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "csifb/calibration.hpp"
#include "csifb/channel.hpp"
#include "csifb/codebook_learn.hpp"
#include "csifb/parametric.hpp"

namespace csifb {

// Experiment configuration, metrics records, CSV/plot emission, and the
// deterministic worker pool used by the evaluation loops.

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OverheadModel {
    double ssb_uses = 0.0;
    double csirs_uses = 0.0;
    double feedback_uses = 0.0;

    double total() const { return ssb_uses + csirs_uses + feedback_uses; }
};

struct SchemeConfig {
    std::string name;
    OverheadModel overhead;
};

inline const std::vector<std::string>& known_scheme_names() {
    static const std::vector<std::string> names{
        "conv_t2_dft", "conv_t2_omp", "parametric", "memory",
        "finetune",    "fused",       "fused_ft"};
    return names;
}

struct ExperimentConfig {
    int n_sites = 4;
    std::size_t n_t = 64;
    std::size_t k_beams = 16;
    std::size_t q_rank = 4;
    std::size_t dict_oversample = 4;
    int ues_per_site = 2500;
    int n_eval_ues = 500;
    double rsrp_noise_db = 1.0;
    double tx_power_db = 40.0;
    double rho_db = 10.0;
    double coherence_uses = 1024.0;
    std::vector<int> budgets{50, 200, 800};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::uint64_t site_seed = 20260808;  // site layouts are fixed across run seeds
    std::string key_domain = "linear";

    // synthetic deployment parameters
    int n_clusters_min = 3;
    int n_clusters_max = 5;
    double min_cluster_separation = 0.06;
    double spread_min = 0.002;
    double spread_max = 0.006;
    int paths_per_ue_min = 2;
    int paths_per_ue_max = 3;
    double shadowing_log_variance = 1.0;
    double path_power_tilt = 0.0;
    // sites draw clusters from a shared direction pool (0 = independent sites)
    int n_global_directions = 12;
    double pool_jitter = 0.0;

    // Experiment profile rescales both fusion branches to unit trace: the
    // literal trace-Q/trace-1 mix lets a missed-neighbor confidence dip pull
    // whole parametric directions into the top-Q (see the ablation CSVs),
    // and the capture-loss bound is stated against a trace-1 reference.
    FusionConfig fusion{.neighborhood_sizes = {5, 10, 20},
                        .alpha_rule = AlphaRule::adaptive_kappa,
                        .fixed_alpha = 0.5,
                        .trace_normalize_branches = true,
                        .key_domain = KeyDomain::linear};
    TrainConfig train{.learning_rate = 1e-3,
                      .batch_size = 128,
                      .steps = 2500,
                      .seed = 0,
                      .l2sp_coefficient = 1e-3,
                      .hidden_dims = {96, 96}};
    std::size_t finetune_steps = 200;

    // codebook learning budget
    int cb_restarts = 1;
    int cb_sweeps = 1;
    int cb_candidates = 2;
    std::size_t cb_val_ues = 32;
    std::size_t cb_memory_ues = 128;
    double cb_gram_bound = 0.05;

    std::vector<SchemeConfig> schemes;  // empty => default list
    int threads = 0;                    // 0 => hardware
    bool timing_in_csv = false;

    KeyDomain key_domain_enum() const { return key_domain_from_name(key_domain); }

    std::vector<SchemeConfig> resolved_schemes() const {
        if (!schemes.empty()) {
            for (const auto& s : schemes) {
                const auto& known = known_scheme_names();
                if (std::find(known.begin(), known.end(), s.name) == known.end())
                    throw ConfigError("unknown scheme: " + s.name);
            }
            return schemes;
        }
        const double k = static_cast<double>(k_beams);
        const double nt = static_cast<double>(n_t);
        const OverheadModel conv{k, nt, 8.0};
        const OverheadModel low{k, 0.0, 1.0};
        return {{"conv_t2_dft", conv}, {"conv_t2_omp", conv}, {"parametric", low},
                {"memory", low},       {"finetune", low},     {"fused", low},
                {"fused_ft", low}};
    }

    SiteParams site_params_for(int n_clusters) const {
        SiteParams p;
        p.n_clusters = n_clusters;
        p.min_cluster_separation = min_cluster_separation;
        p.spread_min = spread_min;
        p.spread_max = spread_max;
        p.paths_per_ue_min = paths_per_ue_min;
        p.paths_per_ue_max = paths_per_ue_max;
        p.shadowing_log_variance = shadowing_log_variance;
        p.min_path_separation = 2.0 / static_cast<double>(n_t);
        p.path_power_tilt = path_power_tilt;
        return p;
    }

    FusionConfig fusion_for_run() const {
        FusionConfig f = fusion;
        f.key_domain = key_domain_enum();
        return f;
    }

    void validate() const {
        if (n_sites < 1) throw ConfigError("config: n_sites must be >= 1");
        if (n_eval_ues <= 0 || ues_per_site <= n_eval_ues)
            throw ConfigError("config: ues_per_site must exceed n_eval_ues");
        if (budgets.empty()) throw ConfigError("config: need at least one budget");
        for (int b : budgets) {
            if (b < 0) throw ConfigError("config: negative budget");
            if (b > ues_per_site - n_eval_ues)
                throw ConfigError("config: budget exceeds the target-site calibration pool");
        }
        if (seeds.empty()) throw ConfigError("config: need at least one seed");
        if (q_rank == 0 || q_rank > n_t) throw ConfigError("config: bad q_rank");
        if (k_beams == 0 || k_beams > n_t) throw ConfigError("config: bad k_beams");
        if (dict_oversample < 1) throw ConfigError("config: bad dict_oversample");
        if (coherence_uses <= 0) throw ConfigError("config: bad coherence_uses");
        for (const auto& s : resolved_schemes())
            if (s.overhead.total() > coherence_uses)
                throw ConfigError("config: overhead exceeds coherence interval for " + s.name);
        if (n_clusters_min < 1 || n_clusters_max < n_clusters_min)
            throw ConfigError("config: bad cluster count range");
        if (n_global_directions > 0 && n_global_directions < n_clusters_max)
            throw ConfigError("config: direction pool smaller than the largest cluster count");
        if (paths_per_ue_max > n_clusters_min)
            throw ConfigError("config: paths_per_ue_max must not exceed n_clusters_min "
                              "(path separation would be infeasible in tight clusters)");
        fusion.validate();
        key_domain_enum();
    }
};

inline ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.n_sites = 2;
    c.n_t = 16;
    c.k_beams = 8;
    c.q_rank = 2;
    c.dict_oversample = 4;
    c.ues_per_site = 260;
    c.n_eval_ues = 60;
    c.budgets = {20, 60};
    c.seeds = {7};
    c.n_clusters_min = 2;
    c.n_clusters_max = 3;
    c.min_cluster_separation = 0.2;
    c.n_global_directions = 4;
    c.paths_per_ue_min = 1;
    c.paths_per_ue_max = 2;
    c.fusion.neighborhood_sizes = {3, 5, 10};
    c.train.steps = 200;
    c.train.batch_size = 64;
    c.train.hidden_dims = {32, 32};
    c.finetune_steps = 80;
    c.cb_restarts = 1;
    c.cb_sweeps = 1;
    c.cb_candidates = 2;
    c.cb_val_ues = 20;
    c.cb_memory_ues = 60;
    return c;
}

// ---- config JSON ----------------------------------------------------------

inline void config_from_json(const nlohmann::ordered_json& j, ExperimentConfig& c) {
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("n_sites", c.n_sites);
    get("n_t", c.n_t);
    get("k_beams", c.k_beams);
    get("q_rank", c.q_rank);
    get("dict_oversample", c.dict_oversample);
    get("ues_per_site", c.ues_per_site);
    get("n_eval_ues", c.n_eval_ues);
    get("rsrp_noise_db", c.rsrp_noise_db);
    get("tx_power_db", c.tx_power_db);
    get("rho_db", c.rho_db);
    get("coherence_uses", c.coherence_uses);
    get("budgets", c.budgets);
    get("seeds", c.seeds);
    get("site_seed", c.site_seed);
    get("key_domain", c.key_domain);
    get("n_clusters_min", c.n_clusters_min);
    get("n_clusters_max", c.n_clusters_max);
    get("min_cluster_separation", c.min_cluster_separation);
    get("spread_min", c.spread_min);
    get("spread_max", c.spread_max);
    get("paths_per_ue_min", c.paths_per_ue_min);
    get("paths_per_ue_max", c.paths_per_ue_max);
    get("shadowing_log_variance", c.shadowing_log_variance);
    get("path_power_tilt", c.path_power_tilt);
    get("n_global_directions", c.n_global_directions);
    get("pool_jitter", c.pool_jitter);
    get("threads", c.threads);
    get("timing_in_csv", c.timing_in_csv);
    get("finetune_steps", c.finetune_steps);
    get("cb_restarts", c.cb_restarts);
    get("cb_sweeps", c.cb_sweeps);
    get("cb_candidates", c.cb_candidates);
    get("cb_val_ues", c.cb_val_ues);
    get("cb_memory_ues", c.cb_memory_ues);
    get("cb_gram_bound", c.cb_gram_bound);
    if (j.contains("fusion")) {
        const auto& f = j.at("fusion");
        if (f.contains("neighborhood_sizes"))
            c.fusion.neighborhood_sizes = f.at("neighborhood_sizes").get<std::vector<std::size_t>>();
        if (f.contains("alpha_rule")) {
            const std::string rule = f.at("alpha_rule").get<std::string>();
            if (rule == "adaptive_kappa") c.fusion.alpha_rule = AlphaRule::adaptive_kappa;
            else if (rule == "fixed") c.fusion.alpha_rule = AlphaRule::fixed;
            else throw ConfigError("config: unknown alpha_rule " + rule);
        }
        if (f.contains("fixed_alpha")) c.fusion.fixed_alpha = f.at("fixed_alpha").get<double>();
        if (f.contains("trace_normalize"))
            c.fusion.trace_normalize_branches = f.at("trace_normalize").get<bool>();
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        if (t.contains("learning_rate")) c.train.learning_rate = t.at("learning_rate").get<double>();
        if (t.contains("batch_size")) c.train.batch_size = t.at("batch_size").get<std::size_t>();
        if (t.contains("steps")) c.train.steps = t.at("steps").get<std::size_t>();
        if (t.contains("l2sp_coefficient"))
            c.train.l2sp_coefficient = t.at("l2sp_coefficient").get<double>();
        if (t.contains("hidden_dims"))
            c.train.hidden_dims = t.at("hidden_dims").get<std::vector<std::size_t>>();
    }
    if (j.contains("schemes")) {
        c.schemes.clear();
        for (const auto& s : j.at("schemes")) {
            SchemeConfig sc;
            sc.name = s.at("name").get<std::string>();
            if (s.contains("ssb_uses")) sc.overhead.ssb_uses = s.at("ssb_uses").get<double>();
            if (s.contains("csirs_uses")) sc.overhead.csirs_uses = s.at("csirs_uses").get<double>();
            if (s.contains("feedback_uses"))
                sc.overhead.feedback_uses = s.at("feedback_uses").get<double>();
            c.schemes.push_back(sc);
        }
    }
}

inline ExperimentConfig load_config(const std::string& path, bool tiny_profile) {
    ExperimentConfig c = tiny_profile ? tiny_config() : ExperimentConfig{};
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot read config file " + path);
        nlohmann::ordered_json j;
        try {
            j = nlohmann::ordered_json::parse(f);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
        config_from_json(j, c);
    }
    c.validate();
    return c;
}

// ---- metrics records and CSV -----------------------------------------------

struct MetricsRecord {
    std::string scheme_tag;
    int site_id = 0;
    int budget = 0;
    std::uint64_t seed = 0;
    double mean_eta = 0.0;
    double p10 = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
    double mean_rate = 0.0;
    int n_eval_ues = 0;
    double wall_ms = 0.0;
};

inline double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

inline MetricsRecord summarize(const std::string& scheme, int site, int budget,
                               std::uint64_t seed, const std::vector<double>& etas,
                               double rho_db, const OverheadModel& overhead,
                               double coherence_uses) {
    MetricsRecord rec;
    rec.scheme_tag = scheme;
    rec.site_id = site;
    rec.budget = budget;
    rec.seed = seed;
    rec.n_eval_ues = static_cast<int>(etas.size());
    if (etas.empty()) return rec;  // degenerate record, flagged by n_eval_ues == 0
    double sum_eta = 0.0, sum_rate = 0.0;
    for (double e : etas) {
        sum_eta += e;
        sum_rate += effective_rate(std::clamp(e, 0.0, 1.0), rho_db, overhead.total(),
                                   coherence_uses);
    }
    rec.mean_eta = sum_eta / static_cast<double>(etas.size());
    rec.mean_rate = sum_rate / static_cast<double>(etas.size());
    rec.p10 = percentile(etas, 0.10);
    rec.p50 = percentile(etas, 0.50);
    rec.p90 = percentile(etas, 0.90);
    return rec;
}

inline const char* csv_header() {
    return "scheme,site,budget,seed,mean_eta,p10,p50,p90,mean_rate,n_ues,wall_ms";
}

inline void sort_records(std::vector<MetricsRecord>& records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const MetricsRecord& a, const MetricsRecord& b) {
                         if (a.scheme_tag != b.scheme_tag) return a.scheme_tag < b.scheme_tag;
                         if (a.site_id != b.site_id) return a.site_id < b.site_id;
                         if (a.budget != b.budget) return a.budget < b.budget;
                         return a.seed < b.seed;
                     });
}

// Fixed header, stable row order, 17-significant-digit floats. wall_ms is
// written as 0 unless timing is requested: run timing is the one
// non-reproducible field and would break byte-identical reruns.
inline std::string records_to_csv(std::vector<MetricsRecord> records, bool include_timing = false) {
    sort_records(records);
    std::string out = csv_header();
    out += "\n";
    char buf[360];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf),
                      "%s,%d,%d,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g\n",
                      r.scheme_tag.c_str(), r.site_id, r.budget,
                      static_cast<unsigned long long>(r.seed), r.mean_eta, r.p10, r.p50, r.p90,
                      r.mean_rate, r.n_eval_ues, include_timing ? r.wall_ms : 0.0);
        out += buf;
    }
    return out;
}

inline void emit_csv(const std::vector<MetricsRecord>& records, const std::string& path,
                     bool include_timing = false) {
    if (records.empty()) throw std::invalid_argument("emit_csv: no records");
    std::ofstream f(path);
    if (!f) throw std::runtime_error("emit_csv: cannot write " + path);
    f << records_to_csv(records, include_timing);
}

inline std::vector<MetricsRecord> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != csv_header())
        throw std::runtime_error("parse_csv: bad header");
    std::vector<MetricsRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        MetricsRecord r;
        std::istringstream ls(line);
        std::string field;
        std::getline(ls, r.scheme_tag, ',');
        auto next = [&]() {
            std::getline(ls, field, ',');
            return field;
        };
        r.site_id = std::stoi(next());
        r.budget = std::stoi(next());
        r.seed = std::stoull(next());
        r.mean_eta = std::stod(next());
        r.p10 = std::stod(next());
        r.p50 = std::stod(next());
        r.p90 = std::stod(next());
        r.mean_rate = std::stod(next());
        r.n_eval_ues = std::stoi(next());
        r.wall_ms = std::stod(next());
        out.push_back(r);
    }
    return out;
}

// gnuplot script reading the CSV alongside it
inline void emit_plot_script(const std::vector<MetricsRecord>& records, const std::string& path,
                             const std::string& csv_name, const std::string& ycol = "mean_eta") {
    if (records.empty()) throw std::invalid_argument("emit_plot_script: no records");
    std::vector<std::string> schemes;
    for (const auto& r : records)
        if (std::find(schemes.begin(), schemes.end(), r.scheme_tag) == schemes.end())
            schemes.push_back(r.scheme_tag);
    std::sort(schemes.begin(), schemes.end());
    const int col = ycol == "mean_rate" ? 9 : 5;

    std::ofstream f(path);
    if (!f) throw std::runtime_error("emit_plot_script: cannot write " + path);
    f << "# gnuplot script; run: gnuplot " << path << "\n";
    f << "set datafile separator ','\n";
    f << "set key outside\n";
    f << "set xlabel 'calibration budget'\n";
    f << "set ylabel '" << (col == 9 ? "mean effective rate (bit/s/Hz)" : "mean capture efficiency")
      << "'\n";
    f << "set grid\n";
    f << "plot \\\n";
    for (std::size_t i = 0; i < schemes.size(); ++i) {
        f << "  '" << csv_name << "' using (strcol(1) eq '" << schemes[i]
          << "' ? $3 : NaN):" << col << " with points pt " << (i + 1) << " title '" << schemes[i]
          << "'";
        f << (i + 1 < schemes.size() ? ", \\\n" : "\n");
    }
}

// ---- deterministic worker pool ---------------------------------------------

// Static chunking; each index writes only its own slot, so the result is
// independent of the thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (n == 0) return;
    unsigned hw = threads > 0 ? static_cast<unsigned>(threads)
                              : std::max(1u, std::thread::hardware_concurrency());
    hw = std::min<unsigned>(hw, static_cast<unsigned>(n));
    if (hw <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mu;
    const std::size_t chunk = (n + hw - 1) / hw;
    for (unsigned t = 0; t < hw; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi]() {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace csifb
