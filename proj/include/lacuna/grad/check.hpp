#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lacuna/core/rng.hpp"
#include "lacuna/grad/backward.hpp"
#include "lacuna/lacunarity/multiscale.hpp"

namespace lacuna {

enum class OpId {
    tanh_scale,
    pool_sum,
    pool_avg,
    pool_max,
    pool_min,
    pool_l2,
    base_lacunarity,
    mix_scales,
    elementwise_mul,
    gap,
    linear_classifier,
    softmax_cross_entropy,
    upsample_bilinear,
    pyr_down,
    multiscale_lacunarity,
};

inline constexpr std::array kAllOps{
    OpId::tanh_scale,      OpId::pool_sum,          OpId::pool_avg,
    OpId::pool_max,        OpId::pool_min,          OpId::pool_l2,
    OpId::base_lacunarity, OpId::mix_scales,        OpId::elementwise_mul,
    OpId::gap,             OpId::linear_classifier, OpId::softmax_cross_entropy,
    OpId::upsample_bilinear, OpId::pyr_down,        OpId::multiscale_lacunarity,
};

inline std::string_view op_name(OpId id) {
    switch (id) {
        case OpId::tanh_scale: return "tanh_scale";
        case OpId::pool_sum: return "pool_sum";
        case OpId::pool_avg: return "pool_avg";
        case OpId::pool_max: return "pool_max";
        case OpId::pool_min: return "pool_min";
        case OpId::pool_l2: return "pool_l2";
        case OpId::base_lacunarity: return "base_lacunarity";
        case OpId::mix_scales: return "mix_scales";
        case OpId::elementwise_mul: return "elementwise_mul";
        case OpId::gap: return "gap";
        case OpId::linear_classifier: return "linear_classifier";
        case OpId::softmax_cross_entropy: return "softmax_cross_entropy";
        case OpId::upsample_bilinear: return "upsample_bilinear";
        case OpId::pyr_down: return "pyr_down";
        case OpId::multiscale_lacunarity: return "multiscale_lacunarity";
    }
    throw ConfigError("unknown op id");
}

inline OpId parse_op(std::string_view name) {
    for (OpId id : kAllOps) {
        if (op_name(id) == name) return id;
    }
    throw ConfigError("unknown op: " + std::string(name));
}

/// Non-tensor arguments of an op. Learnable parameters are passed as tensor
/// inputs so they can be probed like any other coordinate:
///   mix_scales / multiscale_lacunarity: weights (1,1,C,S), bias (1,1,1,C)
///   linear_classifier: weights (1,1,K,F), bias (1,1,1,K)
struct OpParams {
    PoolSpec window = PoolSpec::square(2);
    LacunarityConfig lacunarity = LacunarityConfig::base();
    int target_h = 1;
    int target_w = 1;
    std::vector<int> labels;
};

inline GroupedMixWeights mix_from_maps(const FeatureMap& w, const FeatureMap& b) {
    return {w.height(), w.width(), std::vector<double>(w.data().begin(), w.data().end()),
            std::vector<double>(b.data().begin(), b.data().end())};
}

inline LinearLayer linear_from_maps(const FeatureMap& w, const FeatureMap& b) {
    LinearLayer layer(w.height(), w.width());
    std::copy(w.data().begin(), w.data().end(), layer.weights.begin());
    std::copy(b.data().begin(), b.data().end(), layer.bias.begin());
    return layer;
}

inline FeatureMap vector_as_map(const std::vector<double>& v, int rows, int cols) {
    return FeatureMap({1, 1, rows, cols}, v);
}

/// Forward and backward closures for one op with its parameters bound.
struct OpKernel {
    OpId id = OpId::tanh_scale;
    std::size_t arity = 1;
    std::function<FeatureMap(std::span<const FeatureMap>)> forward;
    std::function<std::vector<Gradient>(std::span<const FeatureMap>, const Gradient&)> backward;
    /// Piecewise ops have kinks; probes straddling one are resampled.
    bool piecewise = false;
};

inline OpKernel make_kernel(OpId id, const OpParams& p) {
    OpKernel k;
    k.id = id;
    using In = std::span<const FeatureMap>;
    using Out = std::vector<Gradient>;
    switch (id) {
        case OpId::tanh_scale:
            k.forward = [](In in) { return tanh_scale(in[0]); };
            k.backward = [](In in, const Gradient& u) { return Out{tanh_scale_backward(in[0], u)}; };
            break;
        case OpId::pool_sum:
            k.forward = [w = p.window](In in) { return pool_sum(in[0], w); };
            k.backward = [w = p.window](In in, const Gradient& u) {
                return Out{pool_sum_backward(in[0].shape(), w, u)};
            };
            break;
        case OpId::pool_avg:
            k.forward = [w = p.window](In in) { return pool_avg(in[0], w); };
            k.backward = [w = p.window](In in, const Gradient& u) {
                return Out{pool_avg_backward(in[0].shape(), w, u)};
            };
            break;
        case OpId::pool_max:
            k.piecewise = true;
            k.forward = [w = p.window](In in) { return pool_max(in[0], w); };
            k.backward = [w = p.window](In in, const Gradient& u) { return Out{pool_max_backward(in[0], w, u)}; };
            break;
        case OpId::pool_min:
            k.piecewise = true;
            k.forward = [w = p.window](In in) { return pool_min(in[0], w); };
            k.backward = [w = p.window](In in, const Gradient& u) { return Out{pool_min_backward(in[0], w, u)}; };
            break;
        case OpId::pool_l2:
            k.forward = [w = p.window](In in) { return pool_l2(in[0], w); };
            k.backward = [w = p.window](In in, const Gradient& u) { return Out{pool_l2_backward(in[0], w, u)}; };
            break;
        case OpId::base_lacunarity:
            k.piecewise = true;
            k.forward = [c = p.lacunarity](In in) { return base_lacunarity(in[0], c); };
            k.backward = [c = p.lacunarity](In in, const Gradient& u) {
                return Out{base_lacunarity_backward(in[0], c, u)};
            };
            break;
        case OpId::mix_scales:
            k.arity = 3;
            k.forward = [](In in) { return mix_scales(in[0], mix_from_maps(in[1], in[2])); };
            k.backward = [](In in, const Gradient& u) {
                const auto mix = mix_from_maps(in[1], in[2]);
                auto g = mix_scales_backward(in[0], mix, u);
                return Out{g.planes, vector_as_map(g.weights, mix.channels, mix.scales),
                           vector_as_map(g.bias, 1, mix.channels)};
            };
            break;
        case OpId::elementwise_mul:
            k.arity = 2;
            k.forward = [](In in) { return elementwise_mul(in[0], in[1]); };
            k.backward = [](In in, const Gradient& u) {
                auto [ga, gb] = elementwise_mul_backward(in[0], in[1], u);
                return Out{ga, gb};
            };
            break;
        case OpId::gap:
            k.forward = [](In in) { return global_avg_pool(in[0]); };
            k.backward = [](In in, const Gradient& u) { return Out{global_avg_pool_backward(in[0].shape(), u)}; };
            break;
        case OpId::linear_classifier:
            k.arity = 3;
            k.forward = [](In in) { return linear_forward(in[0], linear_from_maps(in[1], in[2])); };
            k.backward = [](In in, const Gradient& u) {
                const auto layer = linear_from_maps(in[1], in[2]);
                auto g = linear_backward(in[0], layer, u);
                return Out{g.input, vector_as_map(g.weights, layer.outputs, layer.inputs),
                           vector_as_map(g.bias, 1, layer.outputs)};
            };
            break;
        case OpId::softmax_cross_entropy:
            k.forward = [labels = p.labels](In in) {
                return FeatureMap({1, 1, 1, 1}, softmax_cross_entropy(in[0], labels));
            };
            k.backward = [labels = p.labels](In in, const Gradient& u) {
                return Out{softmax_cross_entropy_backward(in[0], labels, u(0, 0, 0, 0))};
            };
            break;
        case OpId::upsample_bilinear:
            k.forward = [th = p.target_h, tw = p.target_w](In in) { return upsample_bilinear(in[0], th, tw); };
            k.backward = [](In in, const Gradient& u) { return Out{upsample_bilinear_backward(in[0].shape(), u)}; };
            break;
        case OpId::pyr_down:
            k.forward = [](In in) { return pyr_down(in[0]); };
            k.backward = [](In in, const Gradient& u) { return Out{pyr_down_backward(in[0].shape(), u)}; };
            break;
        case OpId::multiscale_lacunarity:
            k.arity = 3;
            k.piecewise = true;
            k.forward = [c = p.lacunarity](In in) {
                return multiscale_lacunarity(in[0], c, mix_from_maps(in[1], in[2]));
            };
            k.backward = [c = p.lacunarity](In in, const Gradient& u) {
                const auto mix = mix_from_maps(in[1], in[2]);
                auto g = multiscale_lacunarity_backward(in[0], c, mix, u);
                return Out{g.input, vector_as_map(g.weights, mix.channels, mix.scales),
                           vector_as_map(g.bias, 1, mix.channels)};
            };
            break;
        default:
            throw ConfigError("make_kernel: unknown op id");
    }
    return k;
}

/// Gradients of every input of `id` given the upstream gradient.
inline std::vector<Gradient> backward(OpId id, const OpParams& params, std::span<const FeatureMap> inputs,
                                      const Gradient& upstream) {
    const OpKernel k = make_kernel(id, params);
    if (inputs.size() != k.arity) {
        throw ShapeError(std::string(op_name(id)) + ": expected " + std::to_string(k.arity) + " inputs");
    }
    return k.backward(inputs, upstream);
}

/// Wraps a kernel so its backward returns negated gradients; used to prove
/// the checker notices a wrong sign.
inline OpKernel with_sign_flip(OpKernel k) {
    k.backward = [inner = std::move(k.backward)](std::span<const FeatureMap> in, const Gradient& u) {
        auto g = inner(in, u);
        for (auto& t : g) {
            for (double& v : t.data()) v = -v;
        }
        return g;
    };
    return k;
}

struct GradCheckReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    int probe_count = 0;
    int resamples = 0;
    bool pass = false;
};

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    int probes = 100;
    int max_resamples = 10;
    std::uint64_t seed = 0;
};

/// Compares analytic gradients against central differences of the scalar
/// loss sum(P * f(x)) for a random fixed projection P. Probes cycle over the
/// inputs so every input, parameters included, is sampled. Outputs are
/// differenced before projecting, so outputs untouched by the probed
/// coordinate contribute no roundoff.
inline GradCheckReport finite_diff_check(const OpKernel& kernel, std::vector<FeatureMap> inputs,
                                         const GradCheckOptions& opt = {}) {
    if (inputs.size() != kernel.arity) throw ShapeError("finite_diff_check: wrong input count");
    Rng rng(opt.seed);
    const FeatureMap out = kernel.forward(inputs);
    FeatureMap projection(out.shape());
    for (double& v : projection.data()) v = rng.uniform(-1.0, 1.0);

    const auto projected_change = [&](const FeatureMap& to, const FeatureMap& from) {
        double acc = 0.0;
        for (std::size_t i = 0; i < to.size(); ++i) acc += projection.data()[i] * (to.data()[i] - from.data()[i]);
        return acc;
    };
    const std::vector<Gradient> analytic = kernel.backward(inputs, projection);

    GradCheckReport report;
    int probe = 0;
    while (report.probe_count < opt.probes) {
        const std::size_t which = static_cast<std::size_t>(probe++) % inputs.size();
        auto& x = inputs[which];
        const auto i = static_cast<std::size_t>(rng.below(x.size()));
        const double orig = x.data()[i];
        x.data()[i] = orig + opt.step;
        const FeatureMap y_up = kernel.forward(inputs);
        x.data()[i] = orig - opt.step;
        const FeatureMap y_down = kernel.forward(inputs);
        x.data()[i] = orig;
        const double up = projected_change(y_up, out);
        const double down = projected_change(y_down, out);
        const double base = 0.0;

        if (kernel.piecewise && report.resamples < opt.max_resamples) {
            const double fwd = (up - base) / opt.step;
            const double bwd = (base - down) / opt.step;
            if (std::abs(fwd - bwd) > 0.1 * std::max(std::abs(fwd), std::abs(bwd)) + 1e-9) {
                ++report.resamples;
                continue;
            }
        }
        const double numeric = projected_change(y_up, y_down) / (2.0 * opt.step);
        const double a = analytic[which].data()[i];
        const double abs_err = std::abs(a - numeric);
        const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-12});
        report.max_abs_error = std::max(report.max_abs_error, abs_err);
        report.max_rel_error = std::max(report.max_rel_error, rel_err);
        ++report.probe_count;
    }
    report.pass = report.max_rel_error < opt.tolerance;
    return report;
}

/// Learnable parameters of the grouped scale-mixing layer: C*S weights + C biases.
inline long long param_count(long long channels, long long scales) {
    if (channels < 1 || scales < 1) throw ConfigError("param_count: channels and scales must be >= 1");
    return channels * scales + channels;
}

// ---------------------------------------------------------------------------
// Release-gate suite

struct WindowCase {
    std::string label;
    PoolSpec window;
};

inline std::vector<WindowCase> gradcheck_window_cases() {
    return {{"k2s1", PoolSpec::square(2, 1)},
            {"k3s2p1", PoolSpec::square(3, 2, 1, 1)},
            {"k2s1d2", PoolSpec::square(2, 1, 2)}};
}

namespace detail {
inline FeatureMap random_map(Rng& rng, Shape s, double lo = -1.0, double hi = 1.0) {
    FeatureMap m(s);
    for (double& v : m.data()) v = rng.uniform(lo, hi);
    return m;
}
}  // namespace detail

/// Representative inputs and parameters for one op, seeded.
inline std::pair<OpParams, std::vector<FeatureMap>> gradcheck_case(OpId id, const PoolSpec& window,
                                                                   std::uint64_t seed) {
    Rng rng(seed);
    OpParams p;
    p.window = window;
    using detail::random_map;
    switch (id) {
        case OpId::tanh_scale:
            return {p, {random_map(rng, {2, 2, 4, 4}, -2.0, 2.0)}};
        case OpId::pool_sum:
        case OpId::pool_avg:
        case OpId::pool_max:
        case OpId::pool_min:
            return {p, {random_map(rng, {2, 3, 7, 7})}};
        case OpId::pool_l2:
            return {p, {random_map(rng, {2, 3, 7, 7}, 0.1, 2.0)}};
        case OpId::base_lacunarity:
            p.lacunarity = LacunarityConfig::base(window);
            return {p, {random_map(rng, {2, 2, 7, 7}, -1.5, 1.5)}};
        case OpId::mix_scales:
            return {p, {random_map(rng, {2, 6, 4, 4}), random_map(rng, {1, 1, 3, 2}), random_map(rng, {1, 1, 1, 3})}};
        case OpId::elementwise_mul:
            return {p, {random_map(rng, {2, 3, 4, 4}), random_map(rng, {2, 3, 1, 1})}};
        case OpId::gap:
            return {p, {random_map(rng, {2, 3, 5, 5})}};
        case OpId::linear_classifier:
            return {p, {random_map(rng, {4, 6, 1, 1}), random_map(rng, {1, 1, 3, 6}), random_map(rng, {1, 1, 1, 3})}};
        case OpId::softmax_cross_entropy:
            p.labels.clear();
            for (int n = 0; n < 5; ++n) p.labels.push_back(static_cast<int>(rng.below(4)));
            return {p, {random_map(rng, {5, 4, 1, 1}, -2.0, 2.0)}};
        case OpId::upsample_bilinear:
            p.target_h = 7;
            p.target_w = 5;
            return {p, {random_map(rng, {1, 2, 3, 4})}};
        case OpId::pyr_down:
            return {p, {random_map(rng, {1, 2, 8, 7})}};
        case OpId::multiscale_lacunarity:
            p.lacunarity = LacunarityConfig::multiscale(window, 2);
            return {p,
                    {random_map(rng, {1, 2, 8, 8}, -1.5, 1.5), random_map(rng, {1, 1, 2, 2}, 0.2, 1.0),
                     random_map(rng, {1, 1, 1, 2})}};
    }
    throw ConfigError("gradcheck_case: unknown op id");
}

struct GradSuiteOptions {
    int seeds = 20;
    GradCheckOptions check{};
    std::optional<OpId> sign_flip;
};

struct GradSuiteRow {
    OpId op = OpId::tanh_scale;
    std::string window;
    GradCheckReport worst;
    int checks = 0;
    int failures = 0;
};

/// Runs every differentiable op over all seeds and window cases.
inline std::vector<GradSuiteRow> run_gradcheck_suite(const GradSuiteOptions& opt = {}) {
    std::vector<GradSuiteRow> rows;
    for (OpId id : kAllOps) {
        for (const auto& wc : gradcheck_window_cases()) {
            GradSuiteRow row{id, wc.label, {}, 0, 0};
            row.worst.pass = true;
            for (int s = 0; s < opt.seeds; ++s) {
                const auto seed = derive_seed(static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(id));
                auto [params, inputs] = gradcheck_case(id, wc.window, seed);
                OpKernel k = make_kernel(id, params);
                if (opt.sign_flip && *opt.sign_flip == id) k = with_sign_flip(std::move(k));
                GradCheckOptions co = opt.check;
                co.seed = derive_seed(seed, 99);
                const auto r = finite_diff_check(k, std::move(inputs), co);
                ++row.checks;
                if (!r.pass) ++row.failures;
                row.worst.max_rel_error = std::max(row.worst.max_rel_error, r.max_rel_error);
                row.worst.max_abs_error = std::max(row.worst.max_abs_error, r.max_abs_error);
                row.worst.probe_count += r.probe_count;
                row.worst.resamples += r.resamples;
                row.worst.pass = row.worst.pass && r.pass;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

inline bool print_gradcheck_table(std::ostream& os, const std::vector<GradSuiteRow>& rows) {
    bool all = true;
    os << std::left << std::setw(24) << "op" << std::setw(10) << "window" << std::setw(8) << "checks"
       << std::setw(16) << "max_rel_error" << std::setw(16) << "max_abs_error" << "result\n";
    for (const auto& r : rows) {
        all = all && r.worst.pass;
        os << std::left << std::setw(24) << op_name(r.op) << std::setw(10) << r.window << std::setw(8) << r.checks
           << std::setw(16) << std::scientific << std::setprecision(3) << r.worst.max_rel_error << std::setw(16)
           << r.worst.max_abs_error << std::defaultfloat << (r.worst.pass ? "PASS" : "FAIL") << '\n';
    }
    os << (all ? "all gradient checks passed" : "gradient check FAILED") << '\n';
    return all;
}

}  // namespace lacuna
