#pragma once

#include <cmath>
#include <vector>

#include "lacuna/core/mixing.hpp"
#include "lacuna/core/pooling.hpp"
#include "lacuna/lacunarity/base.hpp"
#include "lacuna/lacunarity/config.hpp"

namespace lacuna {

/// Differential box counting statistics for one box size r.
///
/// An r x r gliding box sweeps the map with stride 1. Intensities are stacked
/// into boxes of height r numbered from 1 upward, so intensity g sits in box
/// floor(g / r) + 1. With the window maximum in box v and minimum in box u,
/// the column height is v - u - 1. `mass` sums heights over the box positions
/// inside each analysis window and `occupancy` averages them.
struct DbcStats {
    FeatureMap heights;    // (N, C, H - r + 1, W - r + 1)
    FeatureMap mass;       // (N, C, H', W')
    FeatureMap occupancy;  // same shape as mass
};

/// Box positions an r x r box takes inside `window`, as a pooling spec over
/// the heights map. Output dims match `window` on the input for every r.
inline PoolSpec dbc_mass_window(const PoolSpec& window, int r) {
    if (window.padding != 0 || window.dilation != 1) {
        throw ConfigError("dbc: analysis window must have padding 0 and dilation 1");
    }
    if (r < 1 || r > window.kernel_h || r > window.kernel_w) {
        throw ConfigError("dbc: box size " + std::to_string(r) + " must lie in [1, window kernel]");
    }
    return {window.kernel_h - r + 1, window.kernel_w - r + 1, window.stride_h, window.stride_w, 1, 0};
}

inline double dbc_box_index(double g, int r) { return std::floor(g / r) + 1.0; }

/// Expects x already scaled into [0, 255].
inline DbcStats dbc_column_heights(const FeatureMap& x, int r, const PoolSpec& window, bool clamp_heights = false) {
    window.validate(x.height(), x.width());
    const PoolSpec mass_window = dbc_mass_window(window, r);
    const PoolSpec box = PoolSpec::square(r);
    const FeatureMap top = pool_max(x, box);
    const FeatureMap bottom = pool_min(x, box);
    FeatureMap heights(top.shape());
    for (std::size_t i = 0; i < heights.size(); ++i) {
        const double v = dbc_box_index(top.data()[i], r);
        const double u = dbc_box_index(bottom.data()[i], r);
        const double n = v - u - 1.0;
        heights.data()[i] = clamp_heights ? std::max(n, 1.0) : n;
    }
    return {heights, pool_sum(heights, mass_window), pool_avg(heights, mass_window)};
}

/// (M^2 * Q) / (M * Q + eps)^2 per cell.
inline FeatureMap dbc_lacunarity_plane(const DbcStats& stats, double epsilon) {
    FeatureMap out(stats.mass.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double m = stats.mass.data()[i];
        const double q = stats.occupancy.data()[i];
        const double d = m * q + epsilon;
        out.data()[i] = m * m * q / (d * d);
    }
    out.ensure_finite("dbc_lacunarity");
    return out;
}

/// Per-r lacunarity planes, concatenated r-major within each channel:
/// (N, C * |dilation_set|, H', W').
inline FeatureMap dbc_planes(const FeatureMap& x, const LacunarityConfig& cfg) {
    require_method(cfg, LacunarityMethod::dbc, "dbc_lacunarity");
    const FeatureMap scaled = tanh_scale(x);
    const PoolSpec window = cfg.window_for(x.height(), x.width());
    std::vector<FeatureMap> per_r;
    per_r.reserve(cfg.dilation_set.size());
    for (int r : cfg.dilation_set) {
        per_r.push_back(dbc_lacunarity_plane(dbc_column_heights(scaled, r, window, cfg.clamp_heights), cfg.epsilon));
    }
    const int R = static_cast<int>(per_r.size());
    const Shape s = per_r.front().shape();
    FeatureMap out({s.n, s.c * R, s.h, s.w});
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int k = 0; k < R; ++k) {
                auto src = per_r[static_cast<std::size_t>(k)].plane(n, c);
                std::copy(src.begin(), src.end(), out.plane(n, c * R + k).begin());
            }
        }
    }
    return out;
}

inline FeatureMap dbc_lacunarity(const FeatureMap& x, const LacunarityConfig& cfg, const GroupedMixWeights& mix) {
    return mix_scales(dbc_planes(x, cfg), mix);
}

inline FeatureMap dbc_lacunarity(const FeatureMap& x, const LacunarityConfig& cfg) {
    return dbc_lacunarity(x, cfg,
                          GroupedMixWeights::uniform(x.channels(), static_cast<int>(cfg.dilation_set.size())));
}

}  // namespace lacuna
