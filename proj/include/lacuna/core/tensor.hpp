#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lacuna/core/errors.hpp"

namespace lacuna {

/// Extents of a rank-4 (batch, channel, height, width) tensor.
struct Shape {
    int n = 1;
    int c = 1;
    int h = 1;
    int w = 1;

    [[nodiscard]] std::size_t numel() const {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(w);
    }
    [[nodiscard]] std::size_t plane_size() const {
        return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    }

    friend auto operator<=>(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
    std::ostringstream os;
    os << '(' << s.n << ", " << s.c << ", " << s.h << ", " << s.w << ')';
    return os.str();
}

/// Dense row-major NCHW tensor of doubles.
///
/// All dimensions are at least one and every stored value is finite. The
/// constructors enforce both; mutable element access is provided for kernels
/// that write results they have computed from finite arithmetic.
class FeatureMap {
public:
    FeatureMap() : shape_{}, data_(1, 0.0) {}

    explicit FeatureMap(Shape shape, double fill = 0.0) : shape_(shape) {
        check_shape(shape_);
        check_value(fill);
        data_.assign(shape_.numel(), fill);
    }

    FeatureMap(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
        check_shape(shape_);
        if (data_.size() != shape_.numel()) {
            throw ShapeError("FeatureMap: data length " + std::to_string(data_.size()) +
                             " does not match shape " + to_string(shape_));
        }
        for (double v : data_) check_value(v);
    }

    [[nodiscard]] const Shape& shape() const { return shape_; }
    [[nodiscard]] int batch() const { return shape_.n; }
    [[nodiscard]] int channels() const { return shape_.c; }
    [[nodiscard]] int height() const { return shape_.h; }
    [[nodiscard]] int width() const { return shape_.w; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }

    [[nodiscard]] std::size_t index(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    double& operator()(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
    double operator()(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

    [[nodiscard]] std::span<double> data() { return data_; }
    [[nodiscard]] std::span<const double> data() const { return data_; }

    [[nodiscard]] std::span<double> plane(int n, int c) {
        return std::span<double>(data_).subspan(index(n, c, 0, 0), shape_.plane_size());
    }
    [[nodiscard]] std::span<const double> plane(int n, int c) const {
        return std::span<const double>(data_).subspan(index(n, c, 0, 0), shape_.plane_size());
    }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    /// Throws NonFiniteError if a kernel wrote NaN or Inf.
    void ensure_finite(const char* where) const {
        if (!all_finite()) throw NonFiniteError(std::string(where) + ": non-finite value produced");
    }

    friend bool operator==(const FeatureMap& a, const FeatureMap& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    static void check_shape(const Shape& s) {
        if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
            throw ShapeError("FeatureMap: all dimensions must be >= 1, got " + to_string(s));
        }
    }
    static void check_value(double v) {
        if (!std::isfinite(v)) throw NonFiniteError("FeatureMap: non-finite value");
    }

    Shape shape_;
    std::vector<double> data_;
};

inline FeatureMap map_values(const FeatureMap& x, const std::function<double(double)>& f) {
    FeatureMap out(x.shape());
    auto src = x.data();
    auto dst = out.data();
    std::transform(src.begin(), src.end(), dst.begin(), f);
    out.ensure_finite("map_values");
    return out;
}

inline void require_same_shape(const FeatureMap& a, const FeatureMap& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
}

inline FeatureMap add(const FeatureMap& a, const FeatureMap& b) {
    require_same_shape(a, b, "add");
    FeatureMap out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    out.ensure_finite("add");
    return out;
}

inline FeatureMap scale(const FeatureMap& a, double alpha) {
    return map_values(a, [alpha](double v) { return alpha * v; });
}

inline FeatureMap square(const FeatureMap& a) {
    return map_values(a, [](double v) { return v * v; });
}

/// Concatenates maps of equal (N, H, W) along the channel axis.
inline FeatureMap concat_channels(std::span<const FeatureMap> parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    Shape s = parts.front().shape();
    int total_c = 0;
    for (const auto& p : parts) {
        if (p.batch() != s.n || p.height() != s.h || p.width() != s.w) {
            throw ShapeError("concat_channels: incompatible shape " + to_string(p.shape()));
        }
        total_c += p.channels();
    }
    FeatureMap out({s.n, total_c, s.h, s.w});
    for (int n = 0; n < s.n; ++n) {
        int c_out = 0;
        for (const auto& p : parts) {
            for (int c = 0; c < p.channels(); ++c, ++c_out) {
                auto src = p.plane(n, c);
                std::copy(src.begin(), src.end(), out.plane(n, c_out).begin());
            }
        }
    }
    return out;
}

/// Max absolute elementwise difference; shapes must match.
inline double max_abs_diff(const FeatureMap& a, const FeatureMap& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

}  // namespace lacuna
