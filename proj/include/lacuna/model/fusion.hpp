#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lacuna/core/linear.hpp"
#include "lacuna/core/mixing.hpp"
#include "lacuna/core/pooling.hpp"
#include "lacuna/grad/backward.hpp"
#include "lacuna/lacunarity/base.hpp"
#include "lacuna/lacunarity/dbc.hpp"
#include "lacuna/lacunarity/multiscale.hpp"
#include "lacuna/model/backbone.hpp"

namespace lacuna {

/// Pooling branch of the fusion model: three baselines and three lacunarity
/// operators.
enum class PoolingMethod { avg, max, l2, base, dbc, multiscale };

inline std::string_view to_string(PoolingMethod m) {
    switch (m) {
        case PoolingMethod::avg: return "avg";
        case PoolingMethod::max: return "max";
        case PoolingMethod::l2: return "l2";
        case PoolingMethod::base: return "base";
        case PoolingMethod::dbc: return "dbc";
        case PoolingMethod::multiscale: return "multiscale";
    }
    return "?";
}

inline PoolingMethod parse_pooling_method(std::string_view s) {
    if (s == "avg") return PoolingMethod::avg;
    if (s == "max") return PoolingMethod::max;
    if (s == "l2") return PoolingMethod::l2;
    if (s == "base") return PoolingMethod::base;
    if (s == "dbc") return PoolingMethod::dbc;
    if (s == "multiscale" || s == "ms") return PoolingMethod::multiscale;
    throw ConfigError("unknown pooling method: " + std::string(s));
}

inline bool uses_mixing(PoolingMethod m) { return m == PoolingMethod::dbc || m == PoolingMethod::multiscale; }

/// Frozen backbone -> pooling branch (N,C,1,1) times GAP branch (N,C,1,1)
/// -> linear classifier. Only `mix` and `classifier` are trained.
struct FusionModel {
    FrozenBackbone backbone;
    PoolingMethod method = PoolingMethod::avg;
    LacunarityConfig lacunarity;
    std::optional<GroupedMixWeights> mix;
    LinearLayer classifier;

    [[nodiscard]] int channels() const { return backbone.output_channels(); }
    [[nodiscard]] int classes() const { return classifier.outputs; }

    [[nodiscard]] std::size_t trainable_parameter_count() const {
        return classifier.parameter_count() + (mix ? mix->parameter_count() : 0);
    }
    [[nodiscard]] std::size_t mixing_parameter_count() const { return mix ? mix->parameter_count() : 0; }
};

/// Default branch configuration: one global window per map (per pyramid
/// level for multiscale), so the branch output is already 1x1. DBC keeps its
/// default box sizes and also uses a global analysis window.
inline LacunarityConfig default_branch_config(PoolingMethod m, int scales = 2) {
    LacunarityConfig cfg;
    switch (m) {
        case PoolingMethod::dbc: cfg = LacunarityConfig::dbc(); break;
        case PoolingMethod::multiscale: cfg = LacunarityConfig::multiscale(PoolSpec::square(3), scales); break;
        default: cfg = LacunarityConfig::base(); break;
    }
    cfg.window_mode = WindowMode::global;
    return cfg;
}

/// Classifier weights ~ U(-1/sqrt(F), 1/sqrt(F)), bias 0; mixing weights 1/S.
inline FusionModel make_fusion_model(FrozenBackbone backbone, PoolingMethod method, int classes, std::uint64_t seed,
                                     std::optional<LacunarityConfig> lacunarity = std::nullopt) {
    if (classes < 2) throw ConfigError("make_fusion_model: need at least 2 classes");
    const int C = backbone.output_channels();
    FusionModel m{std::move(backbone), method, lacunarity.value_or(default_branch_config(method)), std::nullopt,
                  LinearLayer(classes, C)};
    m.lacunarity.validate();
    if (method == PoolingMethod::multiscale) m.lacunarity.method = LacunarityMethod::multiscale;
    if (method == PoolingMethod::dbc) m.lacunarity.method = LacunarityMethod::dbc;
    if (method == PoolingMethod::base) m.lacunarity.method = LacunarityMethod::base;
    if (method == PoolingMethod::multiscale) m.mix = GroupedMixWeights::uniform(C, m.lacunarity.scales);
    if (method == PoolingMethod::dbc) {
        m.mix = GroupedMixWeights::uniform(C, static_cast<int>(m.lacunarity.dilation_set.size()));
    }
    Rng rng(derive_seed(seed, 0xC1A55));
    const double bound = 1.0 / std::sqrt(static_cast<double>(C));
    for (double& w : m.classifier.weights) w = rng.uniform(-bound, bound);
    return m;
}

/// Branch inputs that do not depend on trainable parameters. Because the
/// backbone is frozen these can be computed once per sample and reused
/// across epochs.
struct BranchInputs {
    FeatureMap gap;      // (N, C, 1, 1)
    FeatureMap pooled;   // (N, C, 1, 1) for parameter-free branches, else per-scale planes
    bool mixed = false;  // pooled must go through the mixing layer
};

inline BranchInputs branch_inputs(const FusionModel& m, const FeatureMap& features) {
    BranchInputs b;
    b.gap = global_avg_pool(features);
    const PoolSpec global = PoolSpec::global(features.height(), features.width());
    switch (m.method) {
        case PoolingMethod::avg: b.pooled = b.gap; break;
        case PoolingMethod::max: b.pooled = pool_max(features, global); break;
        case PoolingMethod::l2: b.pooled = pool_l2(features, global); break;
        case PoolingMethod::base: b.pooled = global_avg_pool(base_lacunarity(features, m.lacunarity)); break;
        case PoolingMethod::dbc:
            b.pooled = dbc_planes(features, m.lacunarity);
            b.mixed = true;
            break;
        case PoolingMethod::multiscale:
            b.pooled = multiscale_planes(features, m.lacunarity);
            b.mixed = true;
            break;
    }
    return b;
}

/// Trainable part of the forward pass, with intermediates for backward.
struct HeadTrace {
    FeatureMap mixed;   // mixing output before the spatial mean (mixed branches)
    FeatureMap branch;  // (N, C, 1, 1)
    FeatureMap fused;   // branch * gap
    FeatureMap logits;  // (N, K, 1, 1)
};

inline HeadTrace head_forward(const FusionModel& m, const BranchInputs& b) {
    HeadTrace t;
    if (b.mixed) {
        t.mixed = mix_scales(b.pooled, *m.mix);
        t.branch = global_avg_pool(t.mixed);
    } else {
        t.branch = b.pooled;
    }
    t.fused = elementwise_mul(t.branch, b.gap);
    t.logits = linear_forward(t.fused, m.classifier);
    return t;
}

/// Gradients for the trainable set.
struct HeadGradients {
    std::vector<double> classifier_weights;
    std::vector<double> classifier_bias;
    std::vector<double> mix_weights;
    std::vector<double> mix_bias;
};

inline HeadGradients head_backward(const FusionModel& m, const BranchInputs& b, const HeadTrace& t,
                                   const Gradient& d_logits) {
    HeadGradients g;
    auto lin = linear_backward(t.fused, m.classifier, d_logits);
    g.classifier_weights = std::move(lin.weights);
    g.classifier_bias = std::move(lin.bias);
    if (b.mixed) {
        const auto [d_branch, d_gap] = elementwise_mul_backward(t.branch, b.gap, lin.input);
        const Gradient d_mixed = global_avg_pool_backward(t.mixed.shape(), d_branch);
        auto mg = mix_scales_backward(b.pooled, *m.mix, d_mixed);
        g.mix_weights = std::move(mg.weights);
        g.mix_bias = std::move(mg.bias);
    }
    return g;
}

inline FeatureMap forward(const FusionModel& m, const FeatureMap& images) {
    return head_forward(m, branch_inputs(m, m.backbone.extract(images))).logits;
}

/// Penultimate-layer features (the fused vector fed to the classifier).
inline FeatureMap fused_features(const FusionModel& m, const FeatureMap& images) {
    return head_forward(m, branch_inputs(m, m.backbone.extract(images))).fused;
}

}  // namespace lacuna
