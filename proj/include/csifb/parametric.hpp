#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "csifb/baselines.hpp"
#include "csifb/mlp.hpp"
#include "csifb/probing.hpp"
#include "csifb/subspace.hpp"

namespace csifb {

// Parametric branch: a beam-scorer network maps a K-beam RSRP fingerprint
// to scores over an oversampled DFT dictionary; the top-Q scored columns
// form the predicted subspace. Trained across source sites, optionally
// fine-tuned on a target site with an L2-SP anchor.

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 512;
    std::size_t steps = 20000;
    std::uint64_t seed = 0;
    double l2sp_coefficient = 1e-3;  // fine-tune only
    std::vector<std::size_t> hidden_dims{128, 128};

    void validate() const {
        if (learning_rate <= 0.0) throw std::invalid_argument("train config: learning rate <= 0");
        if (batch_size == 0) throw std::invalid_argument("train config: batch size == 0");
        if (l2sp_coefficient < 0.0) throw std::invalid_argument("train config: negative l2sp");
    }
};

struct BeamScorerModel {
    Mlp net;  // dims [K, hidden..., D]
    // per-sample centering removes the common large-scale level (gain
    // invariance in dB); the scale puts typical beam contrasts near O(1)
    bool center_input = true;
    double input_shift = 0.0;
    double input_scale = 0.05;
    std::size_t dict_n_t = 0;
    std::size_t dict_oversample = 1;
    std::string dictionary_id;
    std::string trained_codebook_id;
    std::uint64_t seed = 0;

    std::vector<double> features(const RsrpFingerprint& r) const {
        std::vector<double> x(r.values_db.size());
        double mean = 0.0;
        if (center_input) {
            for (double v : r.values_db) mean += v;
            mean /= static_cast<double>(r.values_db.size());
        }
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = (r.values_db[i] - mean + input_shift) * input_scale;
        return x;
    }

    Codebook dictionary() const { return dft_dictionary(dict_n_t, dict_oversample); }
};

inline std::string dictionary_id_of(std::size_t n_t, std::size_t oversample) {
    return "dftdict-" + std::to_string(n_t) + "x" + std::to_string(oversample * n_t);
}

inline BeamScorerModel init_beam_scorer(std::size_t k_beams, std::size_t n_t,
                                        std::size_t dict_oversample,
                                        const std::vector<std::size_t>& hidden,
                                        const std::string& codebook_id, std::uint64_t seed) {
    BeamScorerModel m;
    std::vector<std::size_t> dims;
    dims.push_back(k_beams);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(dict_oversample * n_t);
    m.net = Mlp::init(dims, seed);
    m.dict_n_t = n_t;
    m.dict_oversample = dict_oversample;
    m.dictionary_id = dictionary_id_of(n_t, dict_oversample);
    m.trained_codebook_id = codebook_id;
    m.seed = seed;
    return m;
}

// Indices of the q largest scores, ties broken by lower column index.
inline std::vector<std::size_t> top_q_indices(const std::vector<double>& scores, std::size_t q) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<std::size_t> pick(order.begin(), order.begin() + q);
    std::sort(pick.begin(), pick.end());
    return pick;
}

inline SubspaceDecision predict_subspace(const RsrpFingerprint& r, const BeamScorerModel& model,
                                         const Codebook& dictionary, std::size_t q) {
    if (r.values_db.size() != model.net.input_dim())
        throw std::invalid_argument("predict_subspace: fingerprint length mismatch");
    if (dictionary.k() != model.net.output_dim())
        throw std::invalid_argument("predict_subspace: dictionary size mismatch");
    if (q > dictionary.k()) throw std::invalid_argument("predict_subspace: rank too large");
    const auto scores = model.net.forward(model.features(r));
    const auto pick = top_q_indices(scores, q);
    return make_decision(orthonormalize(dictionary.beams.columns(pick)), "parametric");
}

// Training-label surrogate: greedy dictionary indices covering h. When the
// requested count exceeds the independent picks OMP can make, the remaining
// lowest indices are appended so exactly q labels come back.
inline std::vector<std::size_t> label_top_q(const std::vector<cplx>& h, const Codebook& dictionary,
                                            std::size_t q) {
    auto sel = omp_select(h, dictionary, q);
    std::vector<std::size_t> idx = sel.indices;
    if (idx.size() < q) {
        std::vector<bool> have(dictionary.k(), false);
        for (std::size_t j : idx) have[j] = true;
        for (std::size_t j = 0; j < dictionary.k() && idx.size() < q; ++j)
            if (!have[j]) idx.push_back(j);
    }
    std::sort(idx.begin(), idx.end());
    return idx;
}

struct TrainingSet {
    std::vector<std::vector<double>> inputs;   // standardized fingerprints
    std::vector<std::vector<double>> targets;  // multi-hot over dictionary
};

inline TrainingSet make_training_set(const std::vector<UeChannel>& ues, const Codebook& probing,
                                     const Codebook& dictionary, const BeamScorerModel& model,
                                     std::size_t q, double noise_sigma_db, std::uint64_t seed) {
    TrainingSet ts;
    ts.inputs.reserve(ues.size());
    ts.targets.reserve(ues.size());
    for (std::size_t i = 0; i < ues.size(); ++i) {
        const auto r = measure_rsrp(ues[i], probing, noise_sigma_db, mix_seed(seed, i));
        ts.inputs.push_back(model.features(r));
        std::vector<double> y(dictionary.k(), 0.0);
        for (std::size_t j : label_top_q(ues[i].h, dictionary, q)) y[j] = 1.0;
        ts.targets.push_back(std::move(y));
    }
    return ts;
}

struct TrainResult {
    BeamScorerModel model;
    double probe_loss_initial = 0.0;
    double probe_loss_final = 0.0;
    std::size_t steps_run = 0;
};

namespace detail {

inline double l2sp_penalty_and_grad(const Mlp& net, const Mlp& anchor, double lambda,
                                    MlpGrad* grad) {
    double pen = 0.0;
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
            const double d = net.weights[l][i] - anchor.weights[l][i];
            pen += lambda * d * d;
            if (grad) grad->weights[l][i] += 2.0 * lambda * d;
        }
        for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
            const double d = net.biases[l][i] - anchor.biases[l][i];
            pen += lambda * d * d;
            if (grad) grad->biases[l][i] += 2.0 * lambda * d;
        }
    }
    return pen;
}

inline TrainResult run_training(BeamScorerModel model, const TrainingSet& ts,
                                const TrainConfig& cfg, const Mlp* l2sp_anchor) {
    cfg.validate();
    if (ts.inputs.empty()) throw std::invalid_argument("training: empty dataset");
    const std::size_t n = ts.inputs.size();
    const std::size_t batch = std::min(cfg.batch_size, n);
    const std::size_t probe_n = std::min<std::size_t>(256, n);

    std::vector<std::vector<double>> probe_in(ts.inputs.begin(), ts.inputs.begin() + probe_n);
    std::vector<std::vector<double>> probe_tgt(ts.targets.begin(), ts.targets.begin() + probe_n);
    auto probe_loss = [&](const Mlp& net) {
        double loss = mlp_loss_and_grad(net, probe_in, probe_tgt, nullptr);
        if (l2sp_anchor)
            loss += l2sp_penalty_and_grad(net, *l2sp_anchor, cfg.l2sp_coefficient, nullptr);
        return loss;
    };

    TrainResult out;
    out.probe_loss_initial = probe_loss(model.net);

    Rng shuffle_rng(mix_seed(0x7472696eULL, cfg.seed));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::size_t cursor = n;  // forces a shuffle on first use

    AdamState adam(model.net);
    std::vector<std::vector<double>> bin(batch), btgt(batch);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor >= n) {
                // Fisher-Yates with our own engine
                for (std::size_t i = n; i-- > 1;) {
                    const std::size_t j =
                        static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<long>(i)));
                    std::swap(perm[i], perm[j]);
                }
                cursor = 0;
            }
            const std::size_t pick = perm[cursor++];
            bin[b] = ts.inputs[pick];
            btgt[b] = ts.targets[pick];
        }
        MlpGrad grad = MlpGrad::zeros_like(model.net);
        double loss = mlp_loss_and_grad(model.net, bin, btgt, &grad);
        if (l2sp_anchor)
            loss += l2sp_penalty_and_grad(model.net, *l2sp_anchor, cfg.l2sp_coefficient, &grad);
        if (!std::isfinite(loss))
            throw std::runtime_error("training diverged: non-finite loss at step " +
                                     std::to_string(step));
        adam.step(model.net, grad, cfg.learning_rate);
        ++out.steps_run;
    }
    out.probe_loss_final = probe_loss(model.net);
    out.model = std::move(model);
    return out;
}

}  // namespace detail

inline TrainResult train_parametric(const BeamScorerModel& init, const TrainingSet& ts,
                                    const TrainConfig& cfg) {
    return detail::run_training(init, ts, cfg, nullptr);
}

// Only the scorer parameters move; the probing codebook stays fixed so
// calibration fingerprints remain comparable. The loss carries an L2-SP
// anchor at the pretrained weights.
inline TrainResult fine_tune(const BeamScorerModel& pretrained, const TrainingSet& target_ts,
                             const TrainConfig& cfg) {
    if (target_ts.inputs.empty()) throw std::invalid_argument("fine_tune: empty target set");
    const Mlp anchor = pretrained.net;
    return detail::run_training(pretrained, target_ts, cfg, &anchor);
}

}  // namespace csifb
