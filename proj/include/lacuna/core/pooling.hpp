#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "lacuna/core/tensor.hpp"

namespace lacuna {

/// Window geometry shared by every windowed reduction.
///
/// Padding is symmetric and bounded by half the kernel so every window
/// contains at least one real cell. Padded cells act as the reduction's
/// identity (zero for sums, ignored for max/min).
struct PoolSpec {
    int kernel_h = 2;
    int kernel_w = 2;
    int stride_h = 1;
    int stride_w = 1;
    int dilation = 1;
    int padding = 0;

    static PoolSpec square(int kernel, int stride = 1, int dilation = 1, int padding = 0) {
        return {kernel, kernel, stride, stride, dilation, padding};
    }

    /// One window covering an h x w plane.
    static PoolSpec global(int h, int w) { return {h, w, 1, 1, 1, 0}; }

    [[nodiscard]] int extent_h() const { return dilation * (kernel_h - 1) + 1; }
    [[nodiscard]] int extent_w() const { return dilation * (kernel_w - 1) + 1; }
    [[nodiscard]] int area() const { return kernel_h * kernel_w; }

    [[nodiscard]] int out_h(int h) const { return out_dim(h, extent_h(), stride_h); }
    [[nodiscard]] int out_w(int w) const { return out_dim(w, extent_w(), stride_w); }

    friend bool operator==(const PoolSpec&, const PoolSpec&) = default;

    /// Throws ShapeError unless the spec yields a non-empty output on h x w.
    void validate(int h, int w) const {
        if (kernel_h < 1 || kernel_w < 1) throw ShapeError("PoolSpec: kernel must be >= 1");
        if (stride_h < 1 || stride_w < 1) throw ShapeError("PoolSpec: stride must be >= 1");
        if (dilation < 1) throw ShapeError("PoolSpec: dilation must be >= 1");
        if (padding < 0) throw ShapeError("PoolSpec: padding must be >= 0");
        if (2 * padding > kernel_h || 2 * padding > kernel_w) {
            throw ShapeError("PoolSpec: padding must not exceed half the kernel");
        }
        if (extent_h() > h + 2 * padding || extent_w() > w + 2 * padding || out_h(h) < 1 || out_w(w) < 1) {
            throw ShapeError("PoolSpec: window " + std::to_string(extent_h()) + "x" + std::to_string(extent_w()) +
                             " does not fit input " + std::to_string(h) + "x" + std::to_string(w));
        }
    }

private:
    [[nodiscard]] int out_dim(int in, int extent, int stride) const {
        const int span = in + 2 * padding - extent;
        if (span < 0) return 0;
        return span / stride + 1;
    }
};

/// Calls visit(value, flat_index) for every in-bounds cell of window (oy, ox)
/// of plane (n, c), in row-major window order.
template <typename Visitor>
void for_each_window_cell(const FeatureMap& x, const PoolSpec& spec, int n, int c, int oy, int ox,
                          Visitor&& visit) {
    const int y0 = oy * spec.stride_h - spec.padding;
    const int x0 = ox * spec.stride_w - spec.padding;
    for (int ky = 0; ky < spec.kernel_h; ++ky) {
        const int y = y0 + ky * spec.dilation;
        if (y < 0 || y >= x.height()) continue;
        for (int kx = 0; kx < spec.kernel_w; ++kx) {
            const int xx = x0 + kx * spec.dilation;
            if (xx < 0 || xx >= x.width()) continue;
            const std::size_t idx = x.index(n, c, y, xx);
            visit(x.data()[idx], idx);
        }
    }
}

namespace detail {

/// Applies reduce(window) -> double over every output cell.
template <typename Reduce>
FeatureMap window_reduce(const FeatureMap& x, const PoolSpec& spec, Reduce&& reduce, const char* name) {
    spec.validate(x.height(), x.width());
    const int oh = spec.out_h(x.height());
    const int ow = spec.out_w(x.width());
    FeatureMap out({x.batch(), x.channels(), oh, ow});
    for (int n = 0; n < x.batch(); ++n) {
        for (int c = 0; c < x.channels(); ++c) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) out(n, c, oy, ox) = reduce(n, c, oy, ox);
            }
        }
    }
    out.ensure_finite(name);
    return out;
}

}  // namespace detail

inline FeatureMap pool_sum(const FeatureMap& x, const PoolSpec& spec) {
    return detail::window_reduce(
        x, spec,
        [&](int n, int c, int oy, int ox) {
            double acc = 0.0;
            for_each_window_cell(x, spec, n, c, oy, ox, [&](double v, std::size_t) { acc += v; });
            return acc;
        },
        "pool_sum");
}

/// Sum divided by the full kernel area (padding counts as zeros).
inline FeatureMap pool_avg(const FeatureMap& x, const PoolSpec& spec) {
    const double inv_area = 1.0 / spec.area();
    return detail::window_reduce(
        x, spec,
        [&](int n, int c, int oy, int ox) {
            double acc = 0.0;
            for_each_window_cell(x, spec, n, c, oy, ox, [&](double v, std::size_t) { acc += v; });
            return acc * inv_area;
        },
        "pool_avg");
}

inline FeatureMap pool_max(const FeatureMap& x, const PoolSpec& spec) {
    return detail::window_reduce(
        x, spec,
        [&](int n, int c, int oy, int ox) {
            double best = -std::numeric_limits<double>::infinity();
            for_each_window_cell(x, spec, n, c, oy, ox, [&](double v, std::size_t) {
                if (v > best) best = v;
            });
            return best;
        },
        "pool_max");
}

inline FeatureMap pool_min(const FeatureMap& x, const PoolSpec& spec) {
    return detail::window_reduce(
        x, spec,
        [&](int n, int c, int oy, int ox) {
            double best = std::numeric_limits<double>::infinity();
            for_each_window_cell(x, spec, n, c, oy, ox, [&](double v, std::size_t) {
                if (v < best) best = v;
            });
            return best;
        },
        "pool_min");
}

/// Root of the mean of squares over the full kernel area.
inline FeatureMap pool_l2(const FeatureMap& x, const PoolSpec& spec) {
    const double inv_area = 1.0 / spec.area();
    return detail::window_reduce(
        x, spec,
        [&](int n, int c, int oy, int ox) {
            double acc = 0.0;
            for_each_window_cell(x, spec, n, c, oy, ox, [&](double v, std::size_t) { acc += v * v; });
            return std::sqrt(acc * inv_area);
        },
        "pool_l2");
}

/// Global average pooling to (N, C, 1, 1).
inline FeatureMap global_avg_pool(const FeatureMap& x) {
    return pool_avg(x, PoolSpec::global(x.height(), x.width()));
}

}  // namespace lacuna
