#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "lacuna/core/linear.hpp"
#include "lacuna/core/mixing.hpp"
#include "lacuna/core/pooling.hpp"
#include "lacuna/lacunarity/base.hpp"
#include "lacuna/lacunarity/multiscale.hpp"
#include "lacuna/lacunarity/pyramid.hpp"

// Analytic vector-Jacobian products. Each *_backward takes the forward
// inputs and the upstream gradient dL/d(output) and returns dL/d(input).

namespace lacuna {

/// Gradient with the shape of the tensor it differentiates.
using Gradient = FeatureMap;

inline void require_upstream(const FeatureMap& upstream, const Shape& expected, const char* op) {
    if (upstream.shape() != expected) {
        throw ShapeError(std::string(op) + ": upstream shape " + to_string(upstream.shape()) + ", expected " +
                         to_string(expected));
    }
}

inline Gradient tanh_scale_backward(const FeatureMap& x, const Gradient& upstream) {
    require_upstream(upstream, x.shape(), "tanh_scale_backward");
    Gradient g(x.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double t = std::tanh(x.data()[i]);
        g.data()[i] = upstream.data()[i] * 127.5 * (1.0 - t * t);
    }
    return g;
}

namespace detail {

/// Scatters scale * upstream(window) to every in-bounds cell of that window.
inline Gradient window_scatter(const Shape& in_shape, const PoolSpec& spec, const Gradient& upstream, double scale,
                               const char* op) {
    spec.validate(in_shape.h, in_shape.w);
    require_upstream(upstream, {in_shape.n, in_shape.c, spec.out_h(in_shape.h), spec.out_w(in_shape.w)}, op);
    Gradient g(in_shape);
    auto dst = g.data();
    for (int n = 0; n < in_shape.n; ++n) {
        for (int c = 0; c < in_shape.c; ++c) {
            for (int oy = 0; oy < upstream.height(); ++oy) {
                for (int ox = 0; ox < upstream.width(); ++ox) {
                    const double u = upstream(n, c, oy, ox) * scale;
                    for_each_window_cell(g, spec, n, c, oy, ox, [&](double, std::size_t idx) { dst[idx] += u; });
                }
            }
        }
    }
    return g;
}

/// Routes each window's gradient to its first extremal cell in row-major order.
template <typename Better>
Gradient extremum_scatter(const FeatureMap& x, const PoolSpec& spec, const Gradient& upstream, Better better,
                          double init, const char* op) {
    spec.validate(x.height(), x.width());
    require_upstream(upstream, {x.batch(), x.channels(), spec.out_h(x.height()), spec.out_w(x.width())}, op);
    Gradient g(x.shape());
    for (int n = 0; n < x.batch(); ++n) {
        for (int c = 0; c < x.channels(); ++c) {
            for (int oy = 0; oy < upstream.height(); ++oy) {
                for (int ox = 0; ox < upstream.width(); ++ox) {
                    double best = init;
                    std::size_t arg = 0;
                    for_each_window_cell(x, spec, n, c, oy, ox, [&](double v, std::size_t idx) {
                        if (better(v, best)) {
                            best = v;
                            arg = idx;
                        }
                    });
                    g.data()[arg] += upstream(n, c, oy, ox);
                }
            }
        }
    }
    return g;
}

}  // namespace detail

inline Gradient pool_sum_backward(const Shape& in_shape, const PoolSpec& spec, const Gradient& upstream) {
    return detail::window_scatter(in_shape, spec, upstream, 1.0, "pool_sum_backward");
}

inline Gradient pool_avg_backward(const Shape& in_shape, const PoolSpec& spec, const Gradient& upstream) {
    return detail::window_scatter(in_shape, spec, upstream, 1.0 / spec.area(), "pool_avg_backward");
}

inline Gradient pool_max_backward(const FeatureMap& x, const PoolSpec& spec, const Gradient& upstream) {
    return detail::extremum_scatter(
        x, spec, upstream, [](double v, double best) { return v > best; },
        -std::numeric_limits<double>::infinity(), "pool_max_backward");
}

inline Gradient pool_min_backward(const FeatureMap& x, const PoolSpec& spec, const Gradient& upstream) {
    return detail::extremum_scatter(
        x, spec, upstream, [](double v, double best) { return v < best; },
        std::numeric_limits<double>::infinity(), "pool_min_backward");
}

/// d sqrt(sum x^2 / A) / dx_i = x_i / (A * out); zero where out is zero.
inline Gradient pool_l2_backward(const FeatureMap& x, const PoolSpec& spec, const Gradient& upstream) {
    const FeatureMap out = pool_l2(x, spec);
    require_upstream(upstream, out.shape(), "pool_l2_backward");
    Gradient scaled(out.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double o = out.data()[i];
        scaled.data()[i] = o > 0.0 ? upstream.data()[i] / (spec.area() * o) : 0.0;
    }
    Gradient g = pool_sum_backward(x.shape(), spec, scaled);
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= x.data()[i];
    return g;
}

inline Gradient global_avg_pool_backward(const Shape& in_shape, const Gradient& upstream) {
    return pool_avg_backward(in_shape, PoolSpec::global(in_shape.h, in_shape.w), upstream);
}

/// Backward of gliding_box_lacunarity on already-normalized input. The
/// clamp at zero contributes a zero subgradient where it is active; epsilon
/// is a constant.
inline Gradient gliding_box_lacunarity_backward(const FeatureMap& x, const PoolSpec& window, double epsilon,
                                                const Gradient& upstream) {
    const auto m = window_moments(x, window);
    require_upstream(upstream, m.sum.shape(), "base_lacunarity_backward");
    const double n = window.area();
    Gradient d_sum(m.sum.shape());
    Gradient d_sum_sq(m.sum.shape());
    for (std::size_t i = 0; i < upstream.size(); ++i) {
        const double s1 = m.sum.data()[i];
        const double s2 = m.sum_sq.data()[i];
        const double den = s1 * s1 + epsilon;
        if (n * s2 / den - 1.0 <= 0.0) continue;
        const double u = upstream.data()[i];
        d_sum_sq.data()[i] = u * n / den;
        d_sum.data()[i] = -u * 2.0 * n * s2 * s1 / (den * den);
    }
    Gradient g = pool_sum_backward(x.shape(), window, d_sum);
    const Gradient g_sq = pool_sum_backward(x.shape(), window, d_sum_sq);
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] += 2.0 * x.data()[i] * g_sq.data()[i];
    return g;
}

inline Gradient base_lacunarity_backward(const FeatureMap& x, const LacunarityConfig& cfg, const Gradient& upstream) {
    require_method(cfg, LacunarityMethod::base, "base_lacunarity_backward");
    const PoolSpec window = cfg.window_for(x.height(), x.width());
    if (!cfg.normalize_input) return gliding_box_lacunarity_backward(x, window, cfg.epsilon, upstream);
    const Gradient g = gliding_box_lacunarity_backward(tanh_scale(x), window, cfg.epsilon, upstream);
    return tanh_scale_backward(x, g);
}

struct MixGradients {
    Gradient planes;
    std::vector<double> weights;
    std::vector<double> bias;
};

inline MixGradients mix_scales_backward(const FeatureMap& planes, const GroupedMixWeights& w, const Gradient& upstream) {
    require_upstream(upstream, {planes.batch(), w.channels, planes.height(), planes.width()}, "mix_scales_backward");
    MixGradients g{Gradient(planes.shape()), std::vector<double>(w.weights.size(), 0.0),
                   std::vector<double>(w.bias.size(), 0.0)};
    for (int n = 0; n < planes.batch(); ++n) {
        for (int c = 0; c < w.channels; ++c) {
            auto up = upstream.plane(n, c);
            for (double u : up) g.bias[static_cast<std::size_t>(c)] += u;
            for (int s = 0; s < w.scales; ++s) {
                const int ch = c * w.scales + s;
                auto src = planes.plane(n, ch);
                auto dst = g.planes.plane(n, ch);
                const double k = w.weight(c, s);
                double dw = 0.0;
                for (std::size_t i = 0; i < up.size(); ++i) {
                    dst[i] = k * up[i];
                    dw += src[i] * up[i];
                }
                g.weights[static_cast<std::size_t>(c) * w.scales + s] += dw;
            }
        }
    }
    return g;
}

/// Returns (dL/da, dL/db); a broadcast operand receives the spatial sum.
inline std::pair<Gradient, Gradient> elementwise_mul_backward(const FeatureMap& a, const FeatureMap& b,
                                                              const Gradient& upstream) {
    if (a.shape() == b.shape()) {
        require_upstream(upstream, a.shape(), "elementwise_mul_backward");
        Gradient ga(a.shape());
        Gradient gb(b.shape());
        for (std::size_t i = 0; i < upstream.size(); ++i) {
            ga.data()[i] = upstream.data()[i] * b.data()[i];
            gb.data()[i] = upstream.data()[i] * a.data()[i];
        }
        return {ga, gb};
    }
    const bool b_small = detail::is_channel_scalar_of(b, a);
    if (!b_small && !detail::is_channel_scalar_of(a, b)) {
        throw ShapeError("elementwise_mul_backward: incompatible shapes");
    }
    const FeatureMap& big = b_small ? a : b;
    const FeatureMap& small = b_small ? b : a;
    require_upstream(upstream, big.shape(), "elementwise_mul_backward");
    Gradient g_big(big.shape());
    Gradient g_small(small.shape());
    for (int n = 0; n < big.batch(); ++n) {
        for (int c = 0; c < big.channels(); ++c) {
            const double k = small(n, c, 0, 0);
            auto up = upstream.plane(n, c);
            auto src = big.plane(n, c);
            auto dst = g_big.plane(n, c);
            double acc = 0.0;
            for (std::size_t i = 0; i < up.size(); ++i) {
                dst[i] = up[i] * k;
                acc += up[i] * src[i];
            }
            g_small(n, c, 0, 0) = acc;
        }
    }
    return b_small ? std::pair{g_big, g_small} : std::pair{g_small, g_big};
}

struct LinearGradients {
    Gradient input;
    std::vector<double> weights;
    std::vector<double> bias;
};

inline LinearGradients linear_backward(const FeatureMap& x, const LinearLayer& layer, const Gradient& upstream) {
    require_upstream(upstream, {x.batch(), layer.outputs, 1, 1}, "linear_backward");
    const int F = layer.inputs;
    LinearGradients g{Gradient(x.shape()), std::vector<double>(layer.weights.size(), 0.0),
                      std::vector<double>(layer.bias.size(), 0.0)};
    for (int n = 0; n < x.batch(); ++n) {
        const std::size_t row = static_cast<std::size_t>(n) * F;
        for (int k = 0; k < layer.outputs; ++k) {
            const double u = upstream(n, k, 0, 0);
            g.bias[static_cast<std::size_t>(k)] += u;
            for (int f = 0; f < F; ++f) {
                g.weights[static_cast<std::size_t>(k) * F + f] += u * x.data()[row + f];
                g.input.data()[row + f] += u * layer.w(k, f);
            }
        }
    }
    return g;
}

/// dL/dlogits for L = scale * mean cross-entropy.
inline Gradient softmax_cross_entropy_backward(const FeatureMap& logits, std::span<const int> labels,
                                               double scale = 1.0) {
    check_labels(logits, labels);
    const auto p = softmax_rows(logits);
    const int K = logits.channels();
    Gradient g(logits.shape());
    const double inv_n = scale / logits.batch();
    for (int n = 0; n < logits.batch(); ++n) {
        for (int k = 0; k < K; ++k) {
            const double target = labels[static_cast<std::size_t>(n)] == k ? 1.0 : 0.0;
            g(n, k, 0, 0) = (p[static_cast<std::size_t>(n) * K + k] - target) * inv_n;
        }
    }
    return g;
}

inline Gradient upsample_bilinear_backward(const Shape& in_shape, const Gradient& upstream) {
    const auto ty = bilinear_taps(in_shape.h, upstream.height());
    const auto tx = bilinear_taps(in_shape.w, upstream.width());
    if (upstream.batch() != in_shape.n || upstream.channels() != in_shape.c) {
        throw ShapeError("upsample_bilinear_backward: batch/channel mismatch");
    }
    Gradient g(in_shape);
    for (int n = 0; n < in_shape.n; ++n) {
        for (int c = 0; c < in_shape.c; ++c) {
            for (int y = 0; y < upstream.height(); ++y) {
                const auto& a = ty[static_cast<std::size_t>(y)];
                for (int x = 0; x < upstream.width(); ++x) {
                    const auto& b = tx[static_cast<std::size_t>(x)];
                    const double u = upstream(n, c, y, x);
                    g(n, c, a.lo, b.lo) += u * (1.0 - a.frac) * (1.0 - b.frac);
                    g(n, c, a.lo, b.hi) += u * (1.0 - a.frac) * b.frac;
                    g(n, c, a.hi, b.lo) += u * a.frac * (1.0 - b.frac);
                    g(n, c, a.hi, b.hi) += u * a.frac * b.frac;
                }
            }
        }
    }
    return g;
}

inline Gradient pyr_down_backward(const Shape& in_shape, const Gradient& upstream) {
    require_upstream(upstream, {in_shape.n, in_shape.c, in_shape.h / 2, in_shape.w / 2}, "pyr_down_backward");
    Gradient g(in_shape);
    for (int n = 0; n < in_shape.n; ++n) {
        for (int c = 0; c < in_shape.c; ++c) {
            for (int oy = 0; oy < upstream.height(); ++oy) {
                for (int ox = 0; ox < upstream.width(); ++ox) {
                    const double u = upstream(n, c, oy, ox);
                    for (int a = 0; a < 5; ++a) {
                        const int y = reflect_index(2 * oy + a - 2, in_shape.h);
                        for (int b = 0; b < 5; ++b) {
                            const int x = reflect_index(2 * ox + b - 2, in_shape.w);
                            g(n, c, y, x) += u * kBinomial5[a] * kBinomial5[b];
                        }
                    }
                }
            }
        }
    }
    return g;
}

struct MultiscaleGradients {
    Gradient input;
    std::vector<double> weights;
    std::vector<double> bias;
};

/// Gradients of multiscale_lacunarity with respect to its input and mixing weights.
inline MultiscaleGradients multiscale_lacunarity_backward(const FeatureMap& x, const LacunarityConfig& cfg,
                                                   const GroupedMixWeights& mix, const Gradient& upstream) {
    const MultiscaleTrace t = multiscale_trace(x, cfg);
    MixGradients mg = mix_scales_backward(t.planes, mix, upstream);
    const int S = cfg.scales;
    const int C = x.channels();

    // Walk the pyramid from coarsest to finest, accumulating each level's
    // lacunarity gradient and pushing the running sum through pyr_down.
    Gradient carry;
    bool have_carry = false;
    for (int s = S - 1; s >= 0; --s) {
        const auto& level = t.levels[static_cast<std::size_t>(s)];
        const auto& raw = t.raw[static_cast<std::size_t>(s)];
        Gradient d_up({x.batch(), C, t.planes.height(), t.planes.width()});
        for (int n = 0; n < x.batch(); ++n) {
            for (int c = 0; c < C; ++c) {
                auto src = mg.planes.plane(n, c * S + s);
                std::copy(src.begin(), src.end(), d_up.plane(n, c).begin());
            }
        }
        const Gradient d_raw = upsample_bilinear_backward(raw.shape(), d_up);
        Gradient d_level =
            gliding_box_lacunarity_backward(level, t.windows[static_cast<std::size_t>(s)], cfg.epsilon, d_raw);
        if (have_carry) d_level = add(d_level, carry);
        if (s > 0) {
            carry = pyr_down_backward(t.levels[static_cast<std::size_t>(s - 1)].shape(), d_level);
            have_carry = true;
        } else {
            carry = d_level;
        }
    }
    return {cfg.normalize_input ? tanh_scale_backward(x, carry) : carry, std::move(mg.weights), std::move(mg.bias)};
}

}  // namespace lacuna
