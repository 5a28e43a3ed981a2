#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "csifb/rng.hpp"

namespace csifb {

// Minimal real-valued MLP with rectifier hidden units, trained by Adam on a
// multi-label sigmoid cross-entropy. Double precision throughout so the
// analytic gradients can be checked against finite differences.

struct Mlp {
    std::vector<std::size_t> layer_dims;         // [in, hidden..., out]
    std::vector<std::vector<double>> weights;    // per layer, row-major (out x in)
    std::vector<std::vector<double>> biases;     // per layer (out)

    std::size_t n_layers() const { return weights.size(); }
    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t output_dim() const { return layer_dims.back(); }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
        return n;
    }

    static Mlp init(const std::vector<std::size_t>& dims, std::uint64_t seed) {
        if (dims.size() < 2) throw std::invalid_argument("mlp: need at least input and output dims");
        Mlp m;
        m.layer_dims = dims;
        Rng rng(mix_seed(0x6d6c70ULL, seed));
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            const std::size_t in = dims[l], out = dims[l + 1];
            // uniform in [-1,1]/sqrt(fan_in)
            const double scale = 1.0 / std::sqrt(static_cast<double>(in));
            std::vector<double> w(out * in);
            for (double& x : w) x = scale * (2.0 * rng.uniform() - 1.0);
            m.weights.push_back(std::move(w));
            m.biases.push_back(std::vector<double>(out, 0.0));
        }
        return m;
    }

    std::vector<double> forward(const std::vector<double>& x) const {
        if (x.size() != input_dim()) throw std::invalid_argument("mlp forward: input dim mismatch");
        std::vector<double> a = x;
        for (std::size_t l = 0; l < n_layers(); ++l) {
            const std::size_t in = layer_dims[l], out = layer_dims[l + 1];
            std::vector<double> z(out);
            for (std::size_t o = 0; o < out; ++o) {
                double s = biases[l][o];
                const double* wrow = &weights[l][o * in];
                for (std::size_t i = 0; i < in; ++i) s += wrow[i] * a[i];
                z[o] = s;
            }
            if (l + 1 < n_layers())
                for (double& v : z) v = v > 0.0 ? v : 0.0;
            a = std::move(z);
        }
        return a;
    }
};

inline double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct MlpGrad {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    static MlpGrad zeros_like(const Mlp& m) {
        MlpGrad g;
        for (std::size_t l = 0; l < m.n_layers(); ++l) {
            g.weights.emplace_back(m.weights[l].size(), 0.0);
            g.biases.emplace_back(m.biases[l].size(), 0.0);
        }
        return g;
    }
};

// Mean (over batch and outputs) multi-label sigmoid cross-entropy:
//   L = mean_b mean_j [softplus(z_j) - y_j z_j]
// Returns the loss; accumulates dL/dtheta into grad when non-null.
inline double mlp_loss_and_grad(const Mlp& m, const std::vector<std::vector<double>>& inputs,
                                const std::vector<std::vector<double>>& targets,
                                MlpGrad* grad) {
    if (inputs.empty()) throw std::invalid_argument("mlp loss: empty batch");
    if (inputs.size() != targets.size())
        throw std::invalid_argument("mlp loss: batch size mismatch");
    const std::size_t nl = m.n_layers();
    const double batch_scale = 1.0 / static_cast<double>(inputs.size());
    const double out_scale = 1.0 / static_cast<double>(m.output_dim());

    double loss = 0.0;
    for (std::size_t b = 0; b < inputs.size(); ++b) {
        // forward, caching activations
        std::vector<std::vector<double>> acts;
        acts.push_back(inputs[b]);
        for (std::size_t l = 0; l < nl; ++l) {
            const std::size_t in = m.layer_dims[l], out = m.layer_dims[l + 1];
            std::vector<double> z(out);
            for (std::size_t o = 0; o < out; ++o) {
                double s = m.biases[l][o];
                const double* wrow = &m.weights[l][o * in];
                const double* a = acts.back().data();
                for (std::size_t i = 0; i < in; ++i) s += wrow[i] * a[i];
                z[o] = s;
            }
            if (l + 1 < nl)
                for (double& v : z) v = v > 0.0 ? v : 0.0;
            acts.push_back(std::move(z));
        }
        const auto& scores = acts.back();
        const auto& y = targets[b];
        for (std::size_t j = 0; j < scores.size(); ++j)
            loss += batch_scale * out_scale * (softplus(scores[j]) - y[j] * scores[j]);

        if (!grad) continue;
        // backward
        std::vector<double> delta(scores.size());
        for (std::size_t j = 0; j < scores.size(); ++j)
            delta[j] = batch_scale * out_scale * (sigmoid(scores[j]) - y[j]);
        for (std::size_t l = nl; l-- > 0;) {
            const std::size_t in = m.layer_dims[l], out = m.layer_dims[l + 1];
            const auto& a_in = acts[l];
            for (std::size_t o = 0; o < out; ++o) {
                grad->biases[l][o] += delta[o];
                double* grow = &grad->weights[l][o * in];
                const double d = delta[o];
                for (std::size_t i = 0; i < in; ++i) grow[i] += d * a_in[i];
            }
            if (l == 0) break;
            std::vector<double> prev(in, 0.0);
            for (std::size_t o = 0; o < out; ++o) {
                const double* wrow = &m.weights[l][o * in];
                const double d = delta[o];
                for (std::size_t i = 0; i < in; ++i) prev[i] += d * wrow[i];
            }
            // rectifier gate
            for (std::size_t i = 0; i < in; ++i)
                if (acts[l][i] <= 0.0) prev[i] = 0.0;
            delta = std::move(prev);
        }
    }
    return loss;
}

// Adam state over all parameters of an Mlp, flattened per tensor.
class AdamState {
public:
    explicit AdamState(const Mlp& m)
        : m_(MlpGrad::zeros_like(m)), v_(MlpGrad::zeros_like(m)) {}

    void step(Mlp& model, const MlpGrad& grad, double lr, double beta1 = 0.9,
              double beta2 = 0.999, double eps = 1e-8) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1, t_);
        const double bc2 = 1.0 - std::pow(beta2, t_);
        for (std::size_t l = 0; l < model.n_layers(); ++l) {
            update(model.weights[l], grad.weights[l], m_.weights[l], v_.weights[l], lr, beta1,
                   beta2, eps, bc1, bc2);
            update(model.biases[l], grad.biases[l], m_.biases[l], v_.biases[l], lr, beta1, beta2,
                   eps, bc1, bc2);
        }
    }

private:
    static void update(std::vector<double>& p, const std::vector<double>& g,
                       std::vector<double>& m, std::vector<double>& v, double lr, double b1,
                       double b2, double eps, double bc1, double bc2) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }

    MlpGrad m_;
    MlpGrad v_;
    long t_ = 0;
};

}  // namespace csifb
