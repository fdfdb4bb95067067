#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lacuna/core/tensor.hpp"

namespace lacuna {

/// Source coordinate and blend weight for one output row/column under
/// half-pixel (align-corners-false) bilinear resampling.
struct BilinearTap {
    int lo = 0;
    int hi = 0;
    double frac = 0.0;
};

inline std::vector<BilinearTap> bilinear_taps(int in, int out) {
    std::vector<BilinearTap> taps(static_cast<std::size_t>(out));
    const double ratio = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
        const double src = std::max(0.0, (i + 0.5) * ratio - 0.5);
        const int lo = std::min(static_cast<int>(src), in - 1);
        const int hi = lo < in - 1 ? lo + 1 : lo;
        taps[static_cast<std::size_t>(i)] = {lo, hi, src - lo};
    }
    return taps;
}

inline FeatureMap upsample_bilinear(const FeatureMap& x, int target_h, int target_w) {
    if (target_h < 1 || target_w < 1) throw ShapeError("upsample_bilinear: target dims must be >= 1");
    const auto ty = bilinear_taps(x.height(), target_h);
    const auto tx = bilinear_taps(x.width(), target_w);
    FeatureMap out({x.batch(), x.channels(), target_h, target_w});
    for (int n = 0; n < x.batch(); ++n) {
        for (int c = 0; c < x.channels(); ++c) {
            for (int y = 0; y < target_h; ++y) {
                const auto& a = ty[static_cast<std::size_t>(y)];
                for (int xx = 0; xx < target_w; ++xx) {
                    const auto& b = tx[static_cast<std::size_t>(xx)];
                    const double top = (1.0 - b.frac) * x(n, c, a.lo, b.lo) + b.frac * x(n, c, a.lo, b.hi);
                    const double bot = (1.0 - b.frac) * x(n, c, a.hi, b.lo) + b.frac * x(n, c, a.hi, b.hi);
                    out(n, c, y, xx) = (1.0 - a.frac) * top + a.frac * bot;
                }
            }
        }
    }
    return out;
}

/// Per-channel linear combination of S scale planes: C*S weights plus C biases.
struct GroupedMixWeights {
    int channels = 1;
    int scales = 1;
    std::vector<double> weights;  // channel-major: weights[c * scales + s]
    std::vector<double> bias;

    GroupedMixWeights() : weights(1, 1.0), bias(1, 0.0) {}

    GroupedMixWeights(int c, int s, std::vector<double> w, std::vector<double> b)
        : channels(c), scales(s), weights(std::move(w)), bias(std::move(b)) {
        if (c < 1 || s < 1) throw ConfigError("GroupedMixWeights: channels and scales must be >= 1");
        if (weights.size() != static_cast<std::size_t>(c) * s || bias.size() != static_cast<std::size_t>(c)) {
            throw ShapeError("GroupedMixWeights: expected " + std::to_string(c * s) + " weights and " +
                             std::to_string(c) + " biases");
        }
    }

    /// Every weight 1/S and every bias 0: the mean across scales.
    static GroupedMixWeights uniform(int c, int s) {
        return {c, s, std::vector<double>(static_cast<std::size_t>(c) * s, 1.0 / s),
                std::vector<double>(static_cast<std::size_t>(c), 0.0)};
    }

    static GroupedMixWeights identity(int c) { return uniform(c, 1); }

    [[nodiscard]] double weight(int c, int s) const { return weights[static_cast<std::size_t>(c) * scales + s]; }
    [[nodiscard]] std::size_t parameter_count() const { return weights.size() + bias.size(); }
};

/// Reduces (N, C*S, H, W) to (N, C, H, W); channel c reads planes c*S .. c*S+S-1.
inline FeatureMap mix_scales(const FeatureMap& planes, const GroupedMixWeights& w) {
    if (planes.channels() != w.channels * w.scales) {
        throw ShapeError("mix_scales: input has " + std::to_string(planes.channels()) + " channels, expected " +
                         std::to_string(w.channels) + " x " + std::to_string(w.scales));
    }
    FeatureMap out({planes.batch(), w.channels, planes.height(), planes.width()});
    const std::size_t hw = planes.shape().plane_size();
    for (int n = 0; n < planes.batch(); ++n) {
        for (int c = 0; c < w.channels; ++c) {
            auto dst = out.plane(n, c);
            std::fill(dst.begin(), dst.end(), w.bias[static_cast<std::size_t>(c)]);
            for (int s = 0; s < w.scales; ++s) {
                const double k = w.weight(c, s);
                auto src = planes.plane(n, c * w.scales + s);
                for (std::size_t i = 0; i < hw; ++i) dst[i] += k * src[i];
            }
        }
    }
    out.ensure_finite("mix_scales");
    return out;
}

namespace detail {
inline bool is_channel_scalar_of(const FeatureMap& small, const FeatureMap& big) {
    return small.height() == 1 && small.width() == 1 && small.batch() == big.batch() &&
           small.channels() == big.channels();
}
}  // namespace detail

/// Hadamard product; an operand with 1x1 spatial extent is broadcast.
inline FeatureMap elementwise_mul(const FeatureMap& a, const FeatureMap& b) {
    if (a.shape() == b.shape()) {
        FeatureMap out(a.shape());
        for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
        out.ensure_finite("elementwise_mul");
        return out;
    }
    const bool b_small = detail::is_channel_scalar_of(b, a);
    if (!b_small && !detail::is_channel_scalar_of(a, b)) {
        throw ShapeError("elementwise_mul: incompatible shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
    }
    const FeatureMap& big = b_small ? a : b;
    const FeatureMap& small = b_small ? b : a;
    FeatureMap out(big.shape());
    for (int n = 0; n < big.batch(); ++n) {
        for (int c = 0; c < big.channels(); ++c) {
            const double k = small(n, c, 0, 0);
            auto src = big.plane(n, c);
            auto dst = out.plane(n, c);
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * k;
        }
    }
    out.ensure_finite("elementwise_mul");
    return out;
}

}  // namespace lacuna
