// Experiment driver: synthetic-site generation, cross-site pretraining,
// target-site calibration, LOCO evaluation, ablations, and effective-rate
// accounting. Every subcommand reads one JSON config plus --seed/--out/--tiny
// and writes CSV + JSON artifacts + gnuplot scripts under --out.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "csifb/runner.hpp"
#include "csifb/serialize.hpp"

namespace fs = std::filesystem;
using namespace csifb;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    long long seed_override = -1;
    bool tiny = false;
    int threads = -1;
    bool timing = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("-c,--config", o.config_path, "JSON config file");
    cmd->add_option("-o,--out", o.out_dir, "output directory");
    cmd->add_option("--seed", o.seed_override, "override the seed list with one seed");
    cmd->add_flag("--tiny", o.tiny, "small CI profile (N_t=16, K=8, 2 sites)");
    cmd->add_option("--threads", o.threads, "worker threads (0 = hardware)");
    cmd->add_flag("--timing", o.timing, "include wall-clock ms in CSV (breaks reproducibility)");
}

ExperimentConfig resolve_config(const CommonOpts& o) {
    ExperimentConfig cfg = load_config(o.config_path, o.tiny);
    if (o.seed_override >= 0) cfg.seeds = {static_cast<std::uint64_t>(o.seed_override)};
    if (o.threads >= 0) cfg.threads = o.threads;
    if (o.timing) cfg.timing_in_csv = true;
    cfg.validate();
    return cfg;
}

std::string sites_path(const CommonOpts& o) { return o.out_dir + "/sites.json"; }

std::string artifact_path(const CommonOpts& o, const char* kind, int target,
                          std::uint64_t seed, int budget = -1) {
    std::string p = o.out_dir + "/" + kind + "_t" + std::to_string(target) + "_s" +
                    std::to_string(seed);
    if (budget >= 0) p += "_b" + std::to_string(budget);
    return p + ".json";
}

std::vector<SiteData> load_or_build_sites(const ExperimentConfig& cfg, const CommonOpts& o) {
    std::vector<SiteData> sites;
    if (fs::exists(sites_path(o))) {
        const auto models = sites_from_json(read_json_file(sites_path(o)));
        if (static_cast<int>(models.size()) != cfg.n_sites)
            throw ConfigError("sites.json holds a different site count than the config");
        for (const auto& m : models) {
            SiteData sd;
            sd.model = m;
            for (int u = 0; u < cfg.ues_per_site; ++u)
                sd.geoms.push_back(sample_ue_geometry(m, static_cast<std::uint64_t>(u), u));
            sites.push_back(std::move(sd));
        }
        return sites;
    }
    return build_sites(cfg);
}

void write_sites(const std::vector<SiteData>& sites, const CommonOpts& o) {
    std::vector<SitePropagationModel> models;
    for (const auto& s : sites) models.push_back(s.model);
    write_json_file(sites_to_json(models), sites_path(o));
}

void write_artifacts(const ExperimentConfig& cfg, const TargetArtifacts& art, int target,
                     std::uint64_t seed, const CommonOpts& o) {
    write_json_file(codebook_to_json(art.codebook), artifact_path(o, "codebook", target, seed));
    write_json_file(model_to_json(art.model, art.train_cfg),
                    artifact_path(o, "model", target, seed));
    for (const auto& [budget, mem] : art.memories)
        write_json_file(memory_to_json(mem), artifact_path(o, "memory", target, seed, budget));
    for (const auto& [budget, ft] : art.ft_models) {
        TrainConfig ftc = art.train_cfg;
        ftc.steps = cfg.finetune_steps;
        write_json_file(model_to_json(ft, ftc), artifact_path(o, "ftmodel", target, seed, budget));
    }
}

TargetArtifacts load_artifacts(const ExperimentConfig& cfg, int target, std::uint64_t seed,
                               const CommonOpts& o) {
    TargetArtifacts art;
    const auto cb_path = artifact_path(o, "codebook", target, seed);
    if (!fs::exists(cb_path))
        throw ConfigError("missing artifact " + cb_path + " (run pretrain/calibrate first)");
    art.codebook = codebook_from_json(read_json_file(cb_path));
    art.model = model_from_json(read_json_file(artifact_path(o, "model", target, seed)),
                                &art.train_cfg);
    for (int budget : cfg.budgets) {
        const auto mpath = artifact_path(o, "memory", target, seed, budget);
        if (!fs::exists(mpath))
            throw ConfigError("missing artifact " + mpath + " (run calibrate first)");
        art.memories[budget] = memory_from_json(read_json_file(mpath));
        art.ft_models[budget] =
            model_from_json(read_json_file(artifact_path(o, "ftmodel", target, seed, budget)));
    }
    return art;
}

void emit_with_plot(const std::vector<MetricsRecord>& records, const CommonOpts& o,
                    const std::string& stem, bool timing, const std::string& ycol = "mean_eta") {
    emit_csv(records, o.out_dir + "/" + stem + ".csv", timing);
    emit_plot_script(records, o.out_dir + "/" + stem + ".gp", stem + ".csv", ycol);
    std::printf("wrote %s/%s.csv (%zu records)\n", o.out_dir.c_str(), stem.c_str(),
                records.size());
}

int cmd_gen_sites(const CommonOpts& o) {
    const auto cfg = resolve_config(o);
    fs::create_directories(o.out_dir);
    write_sites(build_sites(cfg), o);
    std::printf("wrote %s\n", sites_path(o).c_str());
    return 0;
}

int cmd_pretrain(const CommonOpts& o) {
    const auto cfg = resolve_config(o);
    fs::create_directories(o.out_dir);
    auto sites = load_or_build_sites(cfg, o);
    write_sites(sites, o);
    for (int target = 0; target < cfg.n_sites; ++target)
        for (std::uint64_t seed : cfg.seeds) {
            auto art = pretrain_for_target(cfg, sites, target, seed);
            write_json_file(codebook_to_json(art.codebook),
                            artifact_path(o, "codebook", target, seed));
            write_json_file(model_to_json(art.model, art.train_cfg),
                            artifact_path(o, "model", target, seed));
            std::printf("pretrained target site %d seed %llu\n", target,
                        static_cast<unsigned long long>(seed));
        }
    return 0;
}

int cmd_calibrate(const CommonOpts& o) {
    const auto cfg = resolve_config(o);
    auto sites = load_or_build_sites(cfg, o);
    for (int target = 0; target < cfg.n_sites; ++target)
        for (std::uint64_t seed : cfg.seeds) {
            TargetArtifacts art;
            const auto cb_path = artifact_path(o, "codebook", target, seed);
            if (!fs::exists(cb_path))
                throw ConfigError("missing artifact " + cb_path + " (run pretrain first)");
            art.codebook = codebook_from_json(read_json_file(cb_path));
            art.model = model_from_json(read_json_file(artifact_path(o, "model", target, seed)),
                                        &art.train_cfg);
            calibrate_target(cfg, sites, target, seed, art);
            write_artifacts(cfg, art, target, seed, o);
            std::printf("calibrated target site %d seed %llu (%zu budgets)\n", target,
                        static_cast<unsigned long long>(seed), art.memories.size());
        }
    return 0;
}

int cmd_eval(const CommonOpts& o) {
    const auto cfg = resolve_config(o);
    auto sites = load_or_build_sites(cfg, o);
    std::vector<MetricsRecord> records;
    for (int target = 0; target < cfg.n_sites; ++target)
        for (std::uint64_t seed : cfg.seeds) {
            const auto art = load_artifacts(cfg, target, seed, o);
            auto recs = evaluate_target(cfg, sites, target, seed, art);
            records.insert(records.end(), recs.begin(), recs.end());
        }
    sort_records(records);
    emit_with_plot(records, o, "eval", cfg.timing_in_csv);
    return 0;
}

int cmd_ablate(const CommonOpts& o, const std::string& which) {
    if (!which.empty() && which != "adaptation_mode" && which != "key_coordinates")
        throw ConfigError("unknown ablation: " + which);
    const auto cfg = resolve_config(o);
    fs::create_directories(o.out_dir);
    auto sites = load_or_build_sites(cfg, o);
    ArtifactStore store;
    if (which.empty() || which == "adaptation_mode") {
        const auto recs = run_ablation(cfg, sites, AblationKind::adaptation_mode, &store);
        emit_with_plot(recs, o, "ablate_adaptation", cfg.timing_in_csv);
    }
    if (which.empty() || which == "key_coordinates") {
        const auto recs = run_ablation(cfg, sites, AblationKind::key_coordinates, &store);
        emit_with_plot(recs, o, "ablate_keys", cfg.timing_in_csv);
    }
    return 0;
}

int cmd_rate(const CommonOpts& o) {
    const auto cfg = resolve_config(o);
    fs::create_directories(o.out_dir);
    auto sites = load_or_build_sites(cfg, o);
    const auto report = run_effective_rate(cfg, sites);
    emit_with_plot(report.records, o, "rate", cfg.timing_in_csv, "mean_rate");
    if (report.crossed)
        std::printf("rate crossing: fused exceeds conv_t2_omp at budget %d\n",
                    report.crossing_budget);
    else
        std::printf("rate crossing: none within configured budgets\n");
    return 0;
}

int cmd_all(const CommonOpts& o) {
    const auto cfg = resolve_config(o);
    fs::create_directories(o.out_dir);
    auto sites = load_or_build_sites(cfg, o);
    write_sites(sites, o);

    ArtifactStore store;
    const auto eval_records = run_loco(cfg, sites, &store);
    for (const auto& [key, art] : store.by_target_seed)
        write_artifacts(cfg, art, key.first, key.second, o);
    emit_with_plot(eval_records, o, "eval", cfg.timing_in_csv);

    // adaptation-mode ablation is the low-overhead scheme subset of the
    // same evaluation (identical seeds and artifacts)
    std::vector<MetricsRecord> adapt;
    for (const auto& r : eval_records)
        if (r.scheme_tag != "conv_t2_dft" && r.scheme_tag != "conv_t2_omp") adapt.push_back(r);
    emit_with_plot(adapt, o, "ablate_adaptation", cfg.timing_in_csv);

    const auto key_records = run_ablation(cfg, sites, AblationKind::key_coordinates, &store);
    emit_with_plot(key_records, o, "ablate_keys", cfg.timing_in_csv);

    const auto report = run_effective_rate(cfg, sites, &store);
    emit_with_plot(report.records, o, "rate", cfg.timing_in_csv, "mean_rate");
    if (report.crossed)
        std::printf("rate crossing: fused exceeds conv_t2_omp at budget %d\n",
                    report.crossing_budget);
    else
        std::printf("rate crossing: none within configured budgets\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"beam-fingerprint CSI subspace acquisition experiments"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string ablation_which;

    auto* gen = app.add_subcommand("gen-sites", "sample synthetic site models");
    add_common(gen, opts);
    auto* pre = app.add_subcommand("pretrain", "learn probing codebook + scorer per held-out site");
    add_common(pre, opts);
    auto* cal = app.add_subcommand("calibrate", "build projector memories and fine-tuned models");
    add_common(cal, opts);
    auto* ev = app.add_subcommand("eval", "evaluate configured schemes on held-out UEs");
    add_common(ev, opts);
    auto* ab = app.add_subcommand("ablate", "adaptation-mode and key-coordinate ablations");
    add_common(ab, opts);
    ab->add_option("--which", ablation_which, "adaptation_mode | key_coordinates (default both)");
    auto* ra = app.add_subcommand("rate", "effective-rate sweep with overhead accounting");
    add_common(ra, opts);
    auto* al = app.add_subcommand("all", "run the full pipeline into --out");
    add_common(al, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_sites(opts);
        if (pre->parsed()) return cmd_pretrain(opts);
        if (cal->parsed()) return cmd_calibrate(opts);
        if (ev->parsed()) return cmd_eval(opts);
        if (ab->parsed()) return cmd_ablate(opts, ablation_which);
        if (ra->parsed()) return cmd_rate(opts);
        if (al->parsed()) return cmd_all(opts);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    }
    return 0;
}
