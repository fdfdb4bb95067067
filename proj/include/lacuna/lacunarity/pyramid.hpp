#pragma once

#include <array>
#include <cstdlib>
#include <string>
#include <vector>

#include "lacuna/core/tensor.hpp"

namespace lacuna {

/// Normalized 5-tap binomial filter; its outer product is the 5x5 blur.
inline constexpr std::array<double, 5> kBinomial5{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

/// Mirror index without repeating the edge sample (d c b | a b c d | c b a).
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i < n ? i : period - i;
}

/// Blur with the 5x5 binomial kernel under reflect padding, then keep cells
/// (2i, 2j) for i < floor(H/2), j < floor(W/2).
inline FeatureMap pyr_down(const FeatureMap& x) {
    const int oh = x.height() / 2;
    const int ow = x.width() / 2;
    if (oh < 1 || ow < 1) {
        throw ShapeError("pyr_down: cannot halve " + std::to_string(x.height()) + "x" + std::to_string(x.width()));
    }
    FeatureMap out({x.batch(), x.channels(), oh, ow});
    for (int n = 0; n < x.batch(); ++n) {
        for (int c = 0; c < x.channels(); ++c) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (int a = 0; a < 5; ++a) {
                        const int y = reflect_index(2 * oy + a - 2, x.height());
                        for (int b = 0; b < 5; ++b) {
                            const int xx = reflect_index(2 * ox + b - 2, x.width());
                            acc += kBinomial5[a] * kBinomial5[b] * x(n, c, y, xx);
                        }
                    }
                    out(n, c, oy, ox) = acc;
                }
            }
        }
    }
    return out;
}

/// Levels 1..S; level 1 is x itself.
inline std::vector<FeatureMap> gaussian_pyramid(const FeatureMap& x, int levels) {
    if (levels < 1) throw ConfigError("gaussian_pyramid: levels must be >= 1");
    std::vector<FeatureMap> out;
    out.reserve(static_cast<std::size_t>(levels));
    out.push_back(x);
    for (int s = 1; s < levels; ++s) {
        const FeatureMap& prev = out.back();
        if (prev.height() < 2 || prev.width() < 2) {
            throw ShapeError("gaussian_pyramid: " + std::to_string(levels) + " levels do not fit " +
                             std::to_string(x.height()) + "x" + std::to_string(x.width()));
        }
        out.push_back(pyr_down(prev));
    }
    return out;
}

}  // namespace lacuna
