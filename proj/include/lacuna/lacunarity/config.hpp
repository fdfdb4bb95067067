#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "lacuna/core/errors.hpp"
#include "lacuna/core/pooling.hpp"

namespace lacuna {

enum class LacunarityMethod { base, dbc, multiscale };

/// fixed: use `window` as given. global: one window spanning each map
/// (for multiscale, each pyramid level) so the output is 1x1 per channel.
enum class WindowMode { fixed, global };

inline std::string_view to_string(LacunarityMethod m) {
    switch (m) {
        case LacunarityMethod::base: return "base";
        case LacunarityMethod::dbc: return "dbc";
        case LacunarityMethod::multiscale: return "multiscale";
    }
    return "?";
}

struct LacunarityConfig {
    LacunarityMethod method = LacunarityMethod::base;
    PoolSpec window = PoolSpec::square(3);
    WindowMode window_mode = WindowMode::fixed;
    double epsilon = 1e-6;
    std::vector<int> dilation_set{1, 2, 3};
    int scales = 2;
    /// Squash inputs into (0, 255) with the tanh map first. DBC always does.
    bool normalize_input = true;
    /// DBC only: clamp column heights to >= 1 (classical box counting).
    bool clamp_heights = false;

    static LacunarityConfig base(PoolSpec window = PoolSpec::square(3)) {
        LacunarityConfig cfg;
        cfg.method = LacunarityMethod::base;
        cfg.window = window;
        return cfg;
    }
    static LacunarityConfig dbc(PoolSpec window = PoolSpec::square(3), std::vector<int> dilations = {1, 2, 3}) {
        LacunarityConfig cfg;
        cfg.method = LacunarityMethod::dbc;
        cfg.window = window;
        cfg.dilation_set = std::move(dilations);
        return cfg;
    }
    static LacunarityConfig multiscale(PoolSpec window = PoolSpec::square(3), int scales = 2) {
        LacunarityConfig cfg;
        cfg.method = LacunarityMethod::multiscale;
        cfg.window = window;
        cfg.scales = scales;
        return cfg;
    }

    /// Window actually applied to an h x w map.
    [[nodiscard]] PoolSpec window_for(int h, int w) const {
        return window_mode == WindowMode::global ? PoolSpec::global(h, w) : window;
    }

    /// Input-independent checks.
    void validate() const {
        if (!(epsilon > 0.0)) throw ConfigError("LacunarityConfig: epsilon must be > 0");
        if (method == LacunarityMethod::multiscale && scales < 1) {
            throw ConfigError("LacunarityConfig: scales must be >= 1");
        }
        if (method == LacunarityMethod::dbc) {
            if (dilation_set.empty()) throw ConfigError("LacunarityConfig: dilation_set must be nonempty");
            for (std::size_t i = 0; i < dilation_set.size(); ++i) {
                if (dilation_set[i] < 1) throw ConfigError("LacunarityConfig: dilations must be >= 1");
                if (i > 0 && dilation_set[i] <= dilation_set[i - 1]) {
                    throw ConfigError("LacunarityConfig: dilation_set must be strictly increasing");
                }
            }
        }
    }
};

inline void require_method(const LacunarityConfig& cfg, LacunarityMethod expected, const char* op) {
    cfg.validate();
    if (cfg.method != expected) {
        throw ConfigError(std::string(op) + ": config method is " + std::string(to_string(cfg.method)) +
                          ", expected " + std::string(to_string(expected)));
    }
}

}  // namespace lacuna
