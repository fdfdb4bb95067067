#pragma once

#include <vector>

#include "lacuna/core/mixing.hpp"
#include "lacuna/lacunarity/base.hpp"
#include "lacuna/lacunarity/pyramid.hpp"

namespace lacuna {

/// Intermediate results of the multiscale operator, kept for backward passes.
struct MultiscaleTrace {
    FeatureMap input;                 // after optional tanh scaling
    std::vector<FeatureMap> levels;   // pyramid levels 1..S
    std::vector<PoolSpec> windows;    // window used at each level
    std::vector<FeatureMap> raw;      // lacunarity per level, native resolution
    FeatureMap planes;                // upsampled, concatenated (N, C*S, H', W')
};

inline MultiscaleTrace multiscale_trace(const FeatureMap& x, const LacunarityConfig& cfg) {
    require_method(cfg, LacunarityMethod::multiscale, "multiscale_lacunarity");
    MultiscaleTrace t;
    t.input = cfg.normalize_input ? tanh_scale(x) : x;
    t.levels = gaussian_pyramid(t.input, cfg.scales);
    for (const auto& level : t.levels) {
        t.windows.push_back(cfg.window_for(level.height(), level.width()));
        t.raw.push_back(gliding_box_lacunarity(level, t.windows.back(), cfg.epsilon));
    }
    const int th = t.raw.front().height();
    const int tw = t.raw.front().width();
    const int S = cfg.scales;
    const int C = x.channels();
    t.planes = FeatureMap({x.batch(), C * S, th, tw});
    for (int s = 0; s < S; ++s) {
        const FeatureMap up = upsample_bilinear(t.raw[static_cast<std::size_t>(s)], th, tw);
        for (int n = 0; n < x.batch(); ++n) {
            for (int c = 0; c < C; ++c) {
                auto src = up.plane(n, c);
                std::copy(src.begin(), src.end(), t.planes.plane(n, c * S + s).begin());
            }
        }
    }
    return t;
}

/// Per-scale lacunarity planes upsampled to level-1 resolution, scale-major
/// within each channel.
inline FeatureMap multiscale_planes(const FeatureMap& x, const LacunarityConfig& cfg) {
    return multiscale_trace(x, cfg).planes;
}

inline FeatureMap multiscale_lacunarity(const FeatureMap& x, const LacunarityConfig& cfg, const GroupedMixWeights& mix) {
    if (mix.channels != x.channels() || mix.scales != cfg.scales) {
        throw ShapeError("multiscale_lacunarity: mixing weights sized for " + std::to_string(mix.channels) + "x" +
                         std::to_string(mix.scales) + ", input needs " + std::to_string(x.channels()) + "x" +
                         std::to_string(cfg.scales));
    }
    return mix_scales(multiscale_planes(x, cfg), mix);
}

}  // namespace lacuna
