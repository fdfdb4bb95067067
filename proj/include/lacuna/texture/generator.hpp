#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lacuna/core/errors.hpp"
#include "lacuna/core/pooling.hpp"
#include "lacuna/core/rng.hpp"
#include "lacuna/core/tensor.hpp"
#include "lacuna/lacunarity/base.hpp"

namespace lacuna {

enum class Grade { low, medium, high };

inline constexpr std::array<Grade, 3> kGrades = {Grade::low, Grade::medium, Grade::high};

inline std::string_view to_string(Grade g) {
    switch (g) {
        case Grade::low: return "low";
        case Grade::medium: return "medium";
        case Grade::high: return "high";
    }
    return "?";
}

inline Grade parse_grade(std::string_view s) {
    if (s == "low") return Grade::low;
    if (s == "medium") return Grade::medium;
    if (s == "high") return Grade::high;
    throw ConfigError("unknown grade: " + std::string(s));
}

inline constexpr double kGapValue = 32.0;
inline constexpr double kBackgroundValue = 224.0;

/// How much of the image is gap per grade.
///  - ordered: gap area rises by 4% per grade around the base fraction, so
///    single-window lacunarity is ordered low < medium < high.
///  - matched: identical gap pixel count for every grade; only the
///    arrangement differs.
enum class GapProfile { ordered, matched };

inline constexpr double kBaseGapFraction = 0.30;

inline double gap_fraction(Grade g, GapProfile profile) {
    if (profile == GapProfile::matched) return kBaseGapFraction;
    switch (g) {
        case Grade::low: return 0.96 * kBaseGapFraction;
        case Grade::medium: return kBaseGapFraction;
        case Grade::high: return 1.04 * kBaseGapFraction;
    }
    return kBaseGapFraction;
}

inline long gap_pixel_count(Grade g, GapProfile profile, int size) {
    return std::lround(gap_fraction(g, profile) * static_cast<double>(size) * size);
}

struct TextureSample {
    FeatureMap image;  // 1x1xHxW, values in {32, 224}
    int label = 0;
    Grade grade = Grade::low;
    std::uint64_t seed = 0;
    int attempts = 1;
};

/// Gliding box used to measure a texture's gappiness: one eighth of the side.
inline int measurement_box(int size) { return std::max(2, size / 8); }

/// Gliding-box lacunarity of a whole image: box masses from a stride-1 box
/// slid over the image, then the normalized second moment of those masses
/// (single window over the mass map). `box` equal to the image side gives the
/// plain single-window value.
inline double global_lacunarity(const FeatureMap& image, int box, double epsilon = 1e-6) {
    if (image.batch() != 1 || image.channels() != 1) throw ShapeError("global_lacunarity: expects a 1x1xHxW map");
    const FeatureMap mass = pool_sum(image, PoolSpec::square(box));
    const FeatureMap l = gliding_box_lacunarity(mass, PoolSpec::global(mass.height(), mass.width()), epsilon);
    return l.data()[0];
}

/// Single window covering the full image.
inline double single_window_lacunarity(const FeatureMap& image, double epsilon = 1e-6) {
    return gliding_box_lacunarity(image, PoolSpec::global(image.height(), image.width()), epsilon).data()[0];
}

/// Acceptance bands for the measured gliding-box lacunarity: a grade's value
/// must lie in [lower, upper). Produced by `calibrate_bands`.
struct GradeBands {
    double low_medium = 0.0;
    double medium_high = 0.0;

    [[nodiscard]] bool accepts(Grade g, double value) const {
        switch (g) {
            case Grade::low: return value < low_medium;
            case Grade::medium: return value >= low_medium && value < medium_high;
            case Grade::high: return value >= medium_high;
        }
        return false;
    }
};

/// From `lacuna calibrate --samples 1000 --size 56 --seed 0` (box 7).
inline constexpr GradeBands kCalibratedBands{0.040525407816089043, 0.14604614076985389};
inline constexpr int kCalibratedSize = 56;

struct Disk {
    double y;
    double x;
    double radius;
};

namespace detail {

inline double lattice_radius(int size) { return static_cast<double>(size) / 24.0; }

inline int lattice_cells(int size) { return std::max(3, size / 8); }

inline std::vector<Disk> lattice_disks(int size, Rng& rng) {
    const int cells = lattice_cells(size);
    const double spacing = static_cast<double>(size) / cells;
    const double oy = rng.uniform(0.0, spacing);
    const double ox = rng.uniform(0.0, spacing);
    std::vector<Disk> out;
    for (int i = 0; i < cells; ++i) {
        for (int j = 0; j < cells; ++j) out.push_back({oy + i * spacing, ox + j * spacing, lattice_radius(size)});
    }
    return out;
}

inline std::vector<Disk> jittered_disks(int size, Rng& rng) {
    const int cells = lattice_cells(size);
    const double spacing = static_cast<double>(size) / cells;
    const double r = lattice_radius(size);
    std::vector<Disk> out;
    for (int i = 0; i < cells; ++i) {
        for (int j = 0; j < cells; ++j) {
            if (rng.uniform() < 0.35) continue;
            const double radius = rng.uniform() < 0.5 ? r : 2.0 * r;
            out.push_back({(i + rng.uniform()) * spacing, (j + rng.uniform()) * spacing, radius});
        }
    }
    return out;
}

/// Parent-child cluster process with Pareto-distributed radii.
inline std::vector<Disk> clustered_disks(int size, Rng& rng) {
    const int parents = 2 + static_cast<int>(rng.below(3));
    const double spread = static_cast<double>(size) / 10.0;
    const double r_min = lattice_radius(size) * 0.6;
    std::vector<Disk> out;
    for (int p = 0; p < parents; ++p) {
        const double py = rng.uniform(0.0, size);
        const double px = rng.uniform(0.0, size);
        const int children = 4 + static_cast<int>(rng.below(8));
        for (int c = 0; c < children; ++c) {
            double u = rng.uniform();
            while (u <= 0.0) u = rng.uniform();
            const double radius = std::min(r_min / std::pow(u, 1.0 / 1.5), static_cast<double>(size) / 4.0);
            out.push_back({py + rng.normal(0.0, spread), px + rng.normal(0.0, spread), radius});
        }
    }
    return out;
}

/// Marks exactly `count` pixels as gap: those deepest inside any disk
/// (largest radius minus distance to center), ties broken by raster order.
inline FeatureMap rasterize(const std::vector<Disk>& disks, int size, long count) {
    const auto cells = static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
    std::vector<double> depth(cells, -1e300);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double best = -1e300;
            for (const auto& d : disks) {
                const double dist = std::hypot(y + 0.5 - d.y, x + 0.5 - d.x);
                best = std::max(best, d.radius - dist);
            }
            depth[static_cast<std::size_t>(y) * size + x] = best;
        }
    }
    std::vector<std::size_t> order(cells);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return depth[a] > depth[b]; });
    FeatureMap image({1, 1, size, size}, kBackgroundValue);
    auto px = image.data();
    for (long i = 0; i < count && i < static_cast<long>(cells); ++i) px[order[static_cast<std::size_t>(i)]] = kGapValue;
    return image;
}

inline std::vector<Disk> place_disks(Grade g, int size, Rng& rng) {
    switch (g) {
        case Grade::low: return lattice_disks(size, rng);
        case Grade::medium: return jittered_disks(size, rng);
        case Grade::high: return clustered_disks(size, rng);
    }
    return {};
}

}  // namespace detail

struct GeneratorOptions {
    GapProfile profile = GapProfile::ordered;
    /// Band check; skipped when unset or when the image size differs from the
    /// size the bands were calibrated at.
    std::optional<GradeBands> bands = std::nullopt;
    int max_retries = 100;
};

/// One texture attempt with no validation.
inline FeatureMap draw_texture(Grade g, int size, std::uint64_t seed, GapProfile profile) {
    Rng rng(seed);
    return detail::rasterize(detail::place_disks(g, size, rng), size, gap_pixel_count(g, profile, size));
}

inline bool bands_are_calibrated(const GradeBands& b) { return b.medium_high > b.low_medium; }

/// Gap texture of the given grade. Attempts are redrawn (with derived seeds)
/// until the measured gliding-box lacunarity lies in the grade's band.
inline TextureSample generate_texture(Grade g, int size, std::uint64_t seed, const GeneratorOptions& opt = {}) {
    if (size < 32) throw ConfigError("generate_texture: size must be >= 32");
    std::optional<GradeBands> bands = opt.bands;
    if (!bands && size == kCalibratedSize && bands_are_calibrated(kCalibratedBands)) bands = kCalibratedBands;
    const int box = measurement_box(size);
    for (int attempt = 0; attempt < opt.max_retries; ++attempt) {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(g) * 1000003ULL + attempt);
        FeatureMap image = draw_texture(g, size, s, opt.profile);
        if (!bands || bands->accepts(g, global_lacunarity(image, box))) {
            return {std::move(image), static_cast<int>(g), g, seed, attempt + 1};
        }
    }
    throw GenerationError("generate_texture: no " + std::string(to_string(g)) + " texture within band after " +
                          std::to_string(opt.max_retries) + " attempts");
}

struct CalibrationResult {
    GradeBands bands;
    std::array<std::vector<double>, 3> samples;  // sorted measurements per grade
    std::array<double, 3> band_hit_rate{};       // fraction of raw draws inside their own band
};

namespace detail {

/// Threshold between two sorted samples minimizing the number of
/// misplaced values; the midpoint of the best gap.
inline double split_point(const std::vector<double>& below, const std::vector<double>& above) {
    std::vector<double> cand(below);
    cand.insert(cand.end(), above.begin(), above.end());
    std::sort(cand.begin(), cand.end());
    double best_t = cand.front();
    long best_err = static_cast<long>(below.size() + above.size()) + 1;
    for (std::size_t i = 0; i + 1 < cand.size(); ++i) {
        const double t = 0.5 * (cand[i] + cand[i + 1]);
        const long err = static_cast<long>(below.end() - std::lower_bound(below.begin(), below.end(), t)) +
                         static_cast<long>(std::lower_bound(above.begin(), above.end(), t) - above.begin());
        if (err < best_err) {
            best_err = err;
            best_t = t;
        }
    }
    return best_t;
}

}  // namespace detail

/// Measures `samples` raw draws per grade and places band edges between
/// adjacent grades.
inline CalibrationResult calibrate_bands(int size, int samples, std::uint64_t seed, GapProfile profile) {
    if (samples < 2) throw ConfigError("calibrate_bands: need at least 2 samples");
    CalibrationResult r;
    const int box = measurement_box(size);
    for (Grade g : kGrades) {
        auto& v = r.samples[static_cast<std::size_t>(g)];
        for (int i = 0; i < samples; ++i) {
            const auto s = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(i)), static_cast<std::uint64_t>(g));
            v.push_back(global_lacunarity(draw_texture(g, size, s, profile), box));
        }
        std::sort(v.begin(), v.end());
    }
    r.bands.low_medium = detail::split_point(r.samples[0], r.samples[1]);
    r.bands.medium_high = detail::split_point(r.samples[1], r.samples[2]);
    for (Grade g : kGrades) {
        const auto& v = r.samples[static_cast<std::size_t>(g)];
        const auto hits = std::count_if(v.begin(), v.end(), [&](double x) { return r.bands.accepts(g, x); });
        r.band_hit_rate[static_cast<std::size_t>(g)] = static_cast<double>(hits) / static_cast<double>(v.size());
    }
    return r;
}

/// Labeled texture set: `per_class` samples of each grade, label = grade
/// index, grouped by class.
inline std::vector<TextureSample> generate_dataset(int per_class, int size, std::uint64_t seed,
                                                   const GeneratorOptions& opt = {}) {
    std::vector<TextureSample> out;
    for (Grade g : kGrades) {
        for (int i = 0; i < per_class; ++i) {
            out.push_back(generate_texture(g, size, derive_seed(seed, static_cast<std::uint64_t>(i)), opt));
        }
    }
    return out;
}

}  // namespace lacuna
