#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "lacuna/core/rng.hpp"
#include "lacuna/core/tensor.hpp"

namespace lacuna {

struct ConvLayer {
    int in_channels = 1;
    int out_channels = 1;
    int kernel = 3;
    int stride = 2;
    int padding = 1;
    std::vector<double> weights;  // (out, in, k, k)
    std::vector<double> bias;

    [[nodiscard]] double w(int o, int i, int ky, int kx) const {
        return weights[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
    }
};

/// Zero-padded 2-D convolution followed by an optional ReLU.
inline FeatureMap conv2d(const FeatureMap& x, const ConvLayer& layer, bool relu) {
    if (x.channels() != layer.in_channels) throw ShapeError("conv2d: channel mismatch");
    const int oh = (x.height() + 2 * layer.padding - layer.kernel) / layer.stride + 1;
    const int ow = (x.width() + 2 * layer.padding - layer.kernel) / layer.stride + 1;
    if (oh < 1 || ow < 1) throw ShapeError("conv2d: input too small");
    FeatureMap out({x.batch(), layer.out_channels, oh, ow});
    for (int n = 0; n < x.batch(); ++n) {
        for (int o = 0; o < layer.out_channels; ++o) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = layer.bias[static_cast<std::size_t>(o)];
                    for (int i = 0; i < layer.in_channels; ++i) {
                        for (int ky = 0; ky < layer.kernel; ++ky) {
                            const int y = oy * layer.stride - layer.padding + ky;
                            if (y < 0 || y >= x.height()) continue;
                            for (int kx = 0; kx < layer.kernel; ++kx) {
                                const int xx = ox * layer.stride - layer.padding + kx;
                                if (xx < 0 || xx >= x.width()) continue;
                                acc += layer.w(o, i, ky, kx) * x(n, i, y, xx);
                            }
                        }
                    }
                    out(n, o, oy, ox) = relu ? std::max(0.0, acc) : acc;
                }
            }
        }
    }
    return out;
}

inline constexpr double kDefaultOutputGain = 16.0;

/// Fixed-seed stack of stride-2 3x3 convolutions with ReLU, standing in for
/// a frozen pretrained extractor. Grayscale pixels in [0, 255] are mapped to
/// [-1, 1] first; 56x56 inputs come out at 7x7. The last layer's weights are
/// He-scaled times `output_gain`, giving activations of a few units like the
/// final block of a trained network rather than unit-variance noise.
class RandomConvBackbone {
public:
    explicit RandomConvBackbone(std::uint64_t seed, int channels = 16, double output_gain = kDefaultOutputGain)
        : seed_(seed) {
        if (channels < 1) throw ConfigError("RandomConvBackbone: channels must be >= 1");
        if (!(output_gain > 0.0) || !std::isfinite(output_gain)) {
            throw ConfigError("RandomConvBackbone: output_gain must be positive");
        }
        Rng rng(derive_seed(seed, 0xBAC));
        const int widths[] = {1, 8, 16, channels};
        for (int l = 0; l < 3; ++l) {
            ConvLayer layer;
            layer.in_channels = widths[l];
            layer.out_channels = widths[l + 1];
            const std::size_t count = static_cast<std::size_t>(layer.out_channels) * layer.in_channels * 9;
            const double stddev = std::sqrt(2.0 / (layer.in_channels * 9.0)) * (l == 2 ? output_gain : 1.0);
            layer.weights.resize(count);
            for (double& v : layer.weights) v = rng.normal(0.0, stddev);
            layer.bias.resize(static_cast<std::size_t>(layer.out_channels));
            for (double& v : layer.bias) v = rng.normal(0.0, 0.1);
            layers_.push_back(std::move(layer));
        }
    }

    [[nodiscard]] FeatureMap extract(const FeatureMap& images) const {
        if (images.channels() != 1) throw ShapeError("RandomConvBackbone: expects single-channel images");
        FeatureMap x = map_values(images, [](double p) { return p / 127.5 - 1.0; });
        for (const auto& layer : layers_) x = conv2d(x, layer, true);
        return x;
    }

    [[nodiscard]] int output_channels() const { return layers_.back().out_channels; }
    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] const std::vector<ConvLayer>& layers() const { return layers_; }

private:
    std::uint64_t seed_;
    std::vector<ConvLayer> layers_;
};

/// Features already extracted elsewhere (e.g. loaded from a LACF file);
/// extraction is the identity after a shape check.
class PrecomputedBackbone {
public:
    PrecomputedBackbone(int channels, int height, int width) : channels_(channels), height_(height), width_(width) {}

    [[nodiscard]] FeatureMap extract(const FeatureMap& features) const {
        if (features.channels() != channels_ || features.height() != height_ || features.width() != width_) {
            throw ShapeError("PrecomputedBackbone: feature shape " + to_string(features.shape()) + " does not match");
        }
        return features;
    }
    [[nodiscard]] int output_channels() const { return channels_; }

private:
    int channels_;
    int height_;
    int width_;
};

/// Frozen feature extractor: never updated by training.
class FrozenBackbone {
public:
    FrozenBackbone(RandomConvBackbone b) : impl_(std::move(b)) {}
    FrozenBackbone(PrecomputedBackbone b) : impl_(std::move(b)) {}

    [[nodiscard]] FeatureMap extract(const FeatureMap& input) const {
        return std::visit([&](const auto& b) { return b.extract(input); }, impl_);
    }
    [[nodiscard]] int output_channels() const {
        return std::visit([](const auto& b) { return b.output_channels(); }, impl_);
    }

    /// Every weight and bias in a fixed order (empty for precomputed features).
    [[nodiscard]] std::vector<double> parameters() const {
        std::vector<double> out;
        if (const auto* conv = std::get_if<RandomConvBackbone>(&impl_)) {
            for (const auto& l : conv->layers()) {
                out.insert(out.end(), l.weights.begin(), l.weights.end());
                out.insert(out.end(), l.bias.begin(), l.bias.end());
            }
        }
        return out;
    }

private:
    std::variant<RandomConvBackbone, PrecomputedBackbone> impl_;
};

}  // namespace lacuna
