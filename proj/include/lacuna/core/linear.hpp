#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "lacuna/core/tensor.hpp"

namespace lacuna {

/// Fully connected layer over flattened per-sample features.
struct LinearLayer {
    int outputs = 1;
    int inputs = 1;
    std::vector<double> weights;  // row-major (outputs x inputs)
    std::vector<double> bias;

    LinearLayer() : weights(1, 0.0), bias(1, 0.0) {}
    LinearLayer(int out, int in) : outputs(out), inputs(in) {
        if (out < 1 || in < 1) throw ConfigError("LinearLayer: dimensions must be >= 1");
        weights.assign(static_cast<std::size_t>(out) * in, 0.0);
        bias.assign(static_cast<std::size_t>(out), 0.0);
    }

    [[nodiscard]] double& w(int k, int f) { return weights[static_cast<std::size_t>(k) * inputs + f]; }
    [[nodiscard]] double w(int k, int f) const { return weights[static_cast<std::size_t>(k) * inputs + f]; }
    [[nodiscard]] std::size_t parameter_count() const { return weights.size() + bias.size(); }
};

inline int flat_features(const FeatureMap& x) { return x.channels() * x.height() * x.width(); }

/// (N, C, H, W) flattened per sample -> logits (N, outputs, 1, 1).
inline FeatureMap linear_forward(const FeatureMap& x, const LinearLayer& layer) {
    const int F = flat_features(x);
    if (F != layer.inputs) {
        throw ShapeError("linear_forward: " + std::to_string(F) + " features, layer expects " +
                         std::to_string(layer.inputs));
    }
    FeatureMap out({x.batch(), layer.outputs, 1, 1});
    const auto data = x.data();
    for (int n = 0; n < x.batch(); ++n) {
        const auto row = data.subspan(static_cast<std::size_t>(n) * F, static_cast<std::size_t>(F));
        for (int k = 0; k < layer.outputs; ++k) {
            double acc = layer.bias[static_cast<std::size_t>(k)];
            for (int f = 0; f < F; ++f) acc += layer.w(k, f) * row[static_cast<std::size_t>(f)];
            out(n, k, 0, 0) = acc;
        }
    }
    out.ensure_finite("linear_forward");
    return out;
}

/// Row-wise softmax of (N, K, 1, 1) logits.
inline std::vector<double> softmax_rows(const FeatureMap& logits) {
    const int N = logits.batch();
    const int K = logits.channels();
    std::vector<double> p(static_cast<std::size_t>(N) * K);
    for (int n = 0; n < N; ++n) {
        double mx = logits(n, 0, 0, 0);
        for (int k = 1; k < K; ++k) mx = std::max(mx, logits(n, k, 0, 0));
        double z = 0.0;
        for (int k = 0; k < K; ++k) {
            const double e = std::exp(logits(n, k, 0, 0) - mx);
            p[static_cast<std::size_t>(n) * K + k] = e;
            z += e;
        }
        for (int k = 0; k < K; ++k) p[static_cast<std::size_t>(n) * K + k] /= z;
    }
    return p;
}

inline void check_labels(const FeatureMap& logits, std::span<const int> labels) {
    if (static_cast<int>(labels.size()) != logits.batch()) {
        throw ShapeError("softmax_cross_entropy: label count does not match batch");
    }
    for (int y : labels) {
        if (y < 0 || y >= logits.channels()) throw ShapeError("softmax_cross_entropy: label out of range");
    }
}

/// Mean negative log-likelihood over the batch.
inline double softmax_cross_entropy(const FeatureMap& logits, std::span<const int> labels) {
    check_labels(logits, labels);
    const int K = logits.channels();
    double loss = 0.0;
    for (int n = 0; n < logits.batch(); ++n) {
        double mx = logits(n, 0, 0, 0);
        for (int k = 1; k < K; ++k) mx = std::max(mx, logits(n, k, 0, 0));
        double z = 0.0;
        for (int k = 0; k < K; ++k) z += std::exp(logits(n, k, 0, 0) - mx);
        loss += std::log(z) + mx - logits(n, labels[static_cast<std::size_t>(n)], 0, 0);
    }
    return loss / logits.batch();
}

inline std::vector<int> argmax_rows(const FeatureMap& logits) {
    std::vector<int> out(static_cast<std::size_t>(logits.batch()));
    for (int n = 0; n < logits.batch(); ++n) {
        int best = 0;
        for (int k = 1; k < logits.channels(); ++k) {
            if (logits(n, k, 0, 0) > logits(n, best, 0, 0)) best = k;
        }
        out[static_cast<std::size_t>(n)] = best;
    }
    return out;
}

}  // namespace lacuna
