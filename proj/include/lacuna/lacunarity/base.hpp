#pragma once

#include <algorithm>
#include <cmath>

#include "lacuna/core/pooling.hpp"
#include "lacuna/lacunarity/config.hpp"

namespace lacuna {

/// ((tanh(x) + 1) / 2) * 255, mapping reals into pixel range (0, 255).
inline double tanh_scale(double x) { return (std::tanh(x) + 1.0) * 127.5; }

inline FeatureMap tanh_scale(const FeatureMap& x) {
    return map_values(x, [](double v) { return tanh_scale(v); });
}

/// Window sums of x and x^2, the two pooled moments lacunarity is built from.
struct WindowMoments {
    FeatureMap sum;
    FeatureMap sum_sq;
};

inline WindowMoments window_moments(const FeatureMap& x, const PoolSpec& window) {
    return {pool_sum(x, window), pool_sum(square(x), window)};
}

/// Gliding-box lacunarity n * sum(x^2) / (sum(x)^2 + eps) - 1 per window,
/// clamped at zero. No input normalization.
inline FeatureMap gliding_box_lacunarity(const FeatureMap& x, const PoolSpec& window, double epsilon) {
    const auto m = window_moments(x, window);
    const double n = window.area();
    FeatureMap out(m.sum.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double s1 = m.sum.data()[i];
        const double s2 = m.sum_sq.data()[i];
        out.data()[i] = std::max(0.0, n * s2 / (s1 * s1 + epsilon) - 1.0);
    }
    out.ensure_finite("gliding_box_lacunarity");
    return out;
}

inline FeatureMap base_lacunarity(const FeatureMap& x, const LacunarityConfig& cfg) {
    require_method(cfg, LacunarityMethod::base, "base_lacunarity");
    const FeatureMap input = cfg.normalize_input ? tanh_scale(x) : x;
    return gliding_box_lacunarity(input, cfg.window_for(x.height(), x.width()), cfg.epsilon);
}

}  // namespace lacuna
