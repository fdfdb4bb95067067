#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "lacuna/core/errors.hpp"
#include "lacuna/core/tensor.hpp"

namespace lacuna {

/// Between- and within-class scatter summed over feature dimensions.
struct Scatter {
    double between = 0.0;
    double within = 0.0;
};

/// Log Fisher discriminant ratio of one feature set, overall and one-vs-rest
/// per class.
struct FdrReport {
    std::vector<double> per_class_log_fdr;
    double log_fdr = 0.0;
    Scatter scatter;
    bool degenerate = false;  // a guard was applied (zero within- or between-class scatter)
};

namespace detail {

inline void check_fdr_inputs(const FeatureMap& features, std::span<const int> labels, int classes) {
    if (static_cast<int>(labels.size()) != features.batch()) throw ShapeError("fisher_discriminant_ratio: label count");
    if (classes < 2) throw ConfigError("fisher_discriminant_ratio: need at least 2 classes");
    std::vector<int> counts(static_cast<std::size_t>(classes), 0);
    for (int y : labels) {
        if (y < 0 || y >= classes) throw ShapeError("fisher_discriminant_ratio: label out of range");
        ++counts[static_cast<std::size_t>(y)];
    }
    for (int n : counts) {
        if (n < 2) throw ConfigError("fisher_discriminant_ratio: every class needs at least 2 samples");
    }
}

/// Scatter sums for an arbitrary grouping of the samples.
inline Scatter scatter_sums(const FeatureMap& features, std::span<const int> groups, int group_count) {
    const int n = features.batch();
    const auto dims = static_cast<std::size_t>(features.shape().numel()) / static_cast<std::size_t>(n);
    const auto data = features.data();
    const auto g_count = static_cast<std::size_t>(group_count);
    std::vector<double> mean(dims, 0.0);
    std::vector<double> group_mean(g_count * dims, 0.0);
    std::vector<int> group_size(g_count, 0);
    for (int i = 0; i < n; ++i) {
        const auto g = static_cast<std::size_t>(groups[static_cast<std::size_t>(i)]);
        ++group_size[g];
        for (std::size_t d = 0; d < dims; ++d) {
            const double v = data[static_cast<std::size_t>(i) * dims + d];
            mean[d] += v;
            group_mean[g * dims + d] += v;
        }
    }
    for (double& m : mean) m /= n;
    for (std::size_t g = 0; g < g_count; ++g) {
        for (std::size_t d = 0; d < dims; ++d) group_mean[g * dims + d] /= group_size[g];
    }
    Scatter s;
    for (std::size_t g = 0; g < g_count; ++g) {
        for (std::size_t d = 0; d < dims; ++d) {
            const double diff = group_mean[g * dims + d] - mean[d];
            s.between += group_size[g] * diff * diff;
        }
    }
    for (int i = 0; i < n; ++i) {
        const auto g = static_cast<std::size_t>(groups[static_cast<std::size_t>(i)]);
        for (std::size_t d = 0; d < dims; ++d) {
            const double diff = data[static_cast<std::size_t>(i) * dims + d] - group_mean[g * dims + d];
            s.within += diff * diff;
        }
    }
    return s;
}

inline double guarded_log_ratio(const Scatter& s, bool& degenerate) {
    if (s.between == 0.0) {
        degenerate = true;
        return -std::numeric_limits<double>::infinity();
    }
    if (s.within == 0.0) {
        degenerate = true;
        return std::log(s.between / (s.within + 1e-12));
    }
    return std::log(s.between / s.within);
}

}  // namespace detail

/// Natural log of (sum over dimensions of between-class scatter) over (sum of
/// within-class scatter). Each sample is one row of `features` flattened.
inline FdrReport fisher_discriminant_ratio(const FeatureMap& features, std::span<const int> labels, int classes) {
    detail::check_fdr_inputs(features, labels, classes);
    FdrReport r;
    r.scatter = detail::scatter_sums(features, labels, classes);
    r.log_fdr = detail::guarded_log_ratio(r.scatter, r.degenerate);
    std::vector<int> one_vs_rest(labels.size());
    for (int c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < labels.size(); ++i) one_vs_rest[i] = labels[i] == c ? 0 : 1;
        const Scatter s = detail::scatter_sums(features, one_vs_rest, 2);
        r.per_class_log_fdr.push_back(detail::guarded_log_ratio(s, r.degenerate));
    }
    return r;
}

struct FdrSummary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for a single run
};

inline FdrSummary summarize(std::span<const double> values) {
    if (values.empty()) throw ConfigError("summarize: no values");
    FdrSummary s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

}  // namespace lacuna
