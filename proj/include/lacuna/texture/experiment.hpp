#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lacuna/grad/check.hpp"
#include "lacuna/io/features.hpp"
#include "lacuna/model/fdr.hpp"
#include "lacuna/model/train.hpp"
#include "lacuna/texture/generator.hpp"

namespace lacuna {

enum class DatasetKind { heterogeneity, separable, file };

struct ExperimentConfig {
    std::vector<PoolingMethod> methods;
    DatasetKind dataset = DatasetKind::heterogeneity;
    int classes = 3;
    int samples_per_class = 100;
    int image_size = 56;
    std::uint64_t seed = 0;
    int runs = 5;
    TrainConfig train;
    int backbone_channels = 16;
    std::uint64_t backbone_seed = 0;
    double backbone_gain = kDefaultOutputGain;
    int scales = 2;
    std::filesystem::path features;  // dataset = file
    std::filesystem::path labels;
    std::filesystem::path output = "results.txt";

    void validate() const {
        if (methods.empty()) throw ConfigError("experiment: at least one method is required");
        if (runs < 1) throw ConfigError("experiment: runs must be >= 1");
        if (scales < 1) throw ConfigError("experiment: scales must be >= 1");
        train.validate();
        switch (dataset) {
            case DatasetKind::heterogeneity:
                if (classes != 3) throw ConfigError("experiment: the heterogeneity dataset has exactly 3 classes");
                if (image_size < 32) throw ConfigError("experiment: image_size must be >= 32");
                break;
            case DatasetKind::separable:
                if (classes < 2) throw ConfigError("experiment: classes must be >= 2");
                if (image_size < 8) throw ConfigError("experiment: image_size must be >= 8");
                break;
            case DatasetKind::file:
                if (features.empty() || labels.empty()) {
                    throw ConfigError("experiment: dataset = file needs features and labels paths");
                }
                break;
        }
        if (dataset != DatasetKind::file && samples_per_class < 10) {
            throw ConfigError("experiment: samples_per_class must be >= 10");
        }
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError("experiment: bad value for " + key + ": '" + value + "'");
    return out;
}

inline double parse_real(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(v)) {
        throw ConfigError("experiment: bad value for " + key + ": '" + value + "'");
    }
    return v;
}

inline std::vector<PoolingMethod> parse_method_list(const std::string& value) {
    std::vector<PoolingMethod> out;
    std::string item;
    std::istringstream is(value);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_pooling_method(item));
    }
    return out;
}

}  // namespace detail

/// Parses `key = value` lines; '#' starts a comment. Unknown keys are errors.
/// A set LACUNA_SEED environment variable overrides `seed`.
inline ExperimentConfig parse_experiment_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    int line_no = 0;
    bool saw_methods = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (detail::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("experiment: line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        using detail::parse_number;
        if (key == "methods") {
            cfg.methods = detail::parse_method_list(value);
            saw_methods = true;
        } else if (key == "dataset") {
            if (value == "heterogeneity") cfg.dataset = DatasetKind::heterogeneity;
            else if (value == "separable") cfg.dataset = DatasetKind::separable;
            else if (value == "file") cfg.dataset = DatasetKind::file;
            else throw ConfigError("experiment: unknown dataset '" + value + "'");
        } else if (key == "classes") {
            cfg.classes = parse_number<int>(key, value);
        } else if (key == "samples_per_class") {
            cfg.samples_per_class = parse_number<int>(key, value);
        } else if (key == "image_size") {
            cfg.image_size = parse_number<int>(key, value);
        } else if (key == "seed") {
            cfg.seed = parse_number<std::uint64_t>(key, value);
        } else if (key == "runs") {
            cfg.runs = parse_number<int>(key, value);
        } else if (key == "batch_size") {
            cfg.train.batch_size = parse_number<int>(key, value);
        } else if (key == "learning_rate") {
            cfg.train.learning_rate = detail::parse_real(key, value);
        } else if (key == "max_epochs") {
            cfg.train.max_epochs = parse_number<int>(key, value);
        } else if (key == "patience") {
            cfg.train.patience = parse_number<int>(key, value);
        } else if (key == "backbone_channels") {
            cfg.backbone_channels = parse_number<int>(key, value);
        } else if (key == "backbone_seed") {
            cfg.backbone_seed = parse_number<std::uint64_t>(key, value);
        } else if (key == "backbone_gain") {
            cfg.backbone_gain = detail::parse_real(key, value);
        } else if (key == "scales") {
            cfg.scales = parse_number<int>(key, value);
        } else if (key == "features") {
            cfg.features = value;
        } else if (key == "labels") {
            cfg.labels = value;
        } else if (key == "output") {
            cfg.output = value;
        } else {
            throw ConfigError("experiment: unknown key '" + key + "'");
        }
    }
    if (!saw_methods) throw ConfigError("experiment: missing 'methods'");
    if (const char* env = std::getenv("LACUNA_SEED"); env != nullptr && *env != '\0') {
        cfg.seed = detail::parse_number<std::uint64_t>("LACUNA_SEED", env);
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return parse_experiment_config(in);
}

/// Classes that differ only in brightness: class c is a uniform image at
/// 40 + 170·c/(classes−1) with ±4 pixel noise.
inline LabeledSet separable_dataset(int classes, int per_class, int size, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x5E9));
    const int n = classes * per_class;
    FeatureMap images({n, 1, size, size});
    std::vector<int> labels;
    for (int c = 0; c < classes; ++c) {
        const double level = 40.0 + 170.0 * c / (classes - 1);
        for (int i = 0; i < per_class; ++i) {
            const int idx = c * per_class + i;
            for (double& v : images.plane(idx, 0)) v = std::round(level + rng.uniform(-4.0, 4.0));
            labels.push_back(c);
        }
    }
    return {std::move(images), std::move(labels)};
}

/// Textures of the three grades with identical gap area, label = grade.
inline LabeledSet heterogeneity_dataset(int per_class, int size, std::uint64_t seed) {
    GeneratorOptions opt;
    opt.profile = GapProfile::matched;
    const auto samples = generate_dataset(per_class, size, seed, opt);
    FeatureMap images({static_cast<int>(samples.size()), 1, size, size});
    std::vector<int> labels;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto src = samples[i].image.data();
        std::copy(src.begin(), src.end(), images.plane(static_cast<int>(i), 0).begin());
        labels.push_back(samples[i].label);
    }
    return {std::move(images), std::move(labels)};
}

struct RunResult {
    std::uint64_t seed = 0;
    Evaluation evaluation;
    FdrReport fdr;
    TrainHistory history;
};

struct MethodResult {
    PoolingMethod method = PoolingMethod::avg;
    std::vector<RunResult> runs;
    std::size_t trainable_parameters = 0;
    std::size_t mixing_parameters = 0;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<MethodResult> methods;
};

namespace detail {

inline FrozenBackbone experiment_backbone(const ExperimentConfig& cfg, const FeatureMap& inputs) {
    if (cfg.dataset == DatasetKind::file) {
        return PrecomputedBackbone(inputs.channels(), inputs.height(), inputs.width());
    }
    return RandomConvBackbone(cfg.backbone_seed, cfg.backbone_channels, cfg.backbone_gain);
}

inline LabeledSet experiment_data(const ExperimentConfig& cfg, std::uint64_t run_seed) {
    switch (cfg.dataset) {
        case DatasetKind::heterogeneity: return heterogeneity_dataset(cfg.samples_per_class, cfg.image_size, run_seed);
        case DatasetKind::separable:
            return separable_dataset(cfg.classes, cfg.samples_per_class, cfg.image_size, run_seed);
        case DatasetKind::file: {
            LabeledSet s{read_features(cfg.features), read_labels(cfg.labels)};
            if (s.size() != s.inputs.batch()) throw ConfigError("experiment: label count does not match features");
            for (int y : s.labels) {
                if (y >= cfg.classes) throw ConfigError("experiment: label exceeds classes");
            }
            return s;
        }
    }
    throw ConfigError("experiment: unknown dataset");
}

}  // namespace detail

/// Trains one model per (method, run). Run r uses seed + r for the dataset,
/// split, initialization and shuffling; the backbone is shared.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentResult result{cfg, {}};
    std::vector<LabeledSet> data;
    std::vector<SplitIndices> splits;
    for (int r = 0; r < cfg.runs; ++r) {
        const std::uint64_t run_seed = cfg.seed + static_cast<std::uint64_t>(r);
        data.push_back(detail::experiment_data(cfg, run_seed));
        splits.push_back(split_70_10_20(data.back().labels, run_seed));
    }
    for (PoolingMethod method : cfg.methods) {
        MethodResult mr;
        mr.method = method;
        for (int r = 0; r < cfg.runs; ++r) {
            const std::uint64_t run_seed = cfg.seed + static_cast<std::uint64_t>(r);
            const LabeledSet& all = data[static_cast<std::size_t>(r)];
            const SplitIndices& split = splits[static_cast<std::size_t>(r)];
            LacunarityConfig lc = default_branch_config(method, cfg.scales);
            FusionModel model =
                make_fusion_model(detail::experiment_backbone(cfg, all.inputs), method, cfg.classes, run_seed, lc);
            mr.trainable_parameters = model.trainable_parameter_count();
            mr.mixing_parameters = model.mixing_parameter_count();
            TrainConfig tc = cfg.train;
            tc.seed = run_seed;
            RunResult run;
            run.seed = run_seed;
            run.history = train(model, subset(all, split.train), subset(all, split.validation), tc);
            const LabeledSet test = subset(all, split.test);
            run.evaluation = evaluate(model, test);
            run.fdr = fisher_discriminant_ratio(fused_features(model, test.inputs), test.labels, cfg.classes);
            mr.runs.push_back(std::move(run));
        }
        result.methods.push_back(std::move(mr));
    }
    return result;
}

namespace detail {

inline std::string fixed(double v, int digits) {
    if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

}  // namespace detail

/// Structured text: top-level `key = value` lines, one indented section per
/// method.
inline std::string format_results(const ExperimentResult& r) {
    using detail::fixed;
    const auto& cfg = r.config;
    std::ostringstream os;
    os << "experiment\n";
    os << "  dataset = "
       << (cfg.dataset == DatasetKind::heterogeneity ? "heterogeneity"
                                                      : cfg.dataset == DatasetKind::separable ? "separable" : "file")
       << "\n";
    os << "  classes = " << cfg.classes << "\n";
    if (cfg.dataset != DatasetKind::file) {
        os << "  samples_per_class = " << cfg.samples_per_class << "\n";
        os << "  image_size = " << cfg.image_size << "\n";
        os << "  backbone_channels = " << cfg.backbone_channels << "\n";
        os << "  backbone_seed = " << cfg.backbone_seed << "\n";
    }
    os << "  seed = " << cfg.seed << "\n";
    os << "  runs = " << cfg.runs << "\n";
    os << "  batch_size = " << cfg.train.batch_size << "\n";
    os << "  learning_rate = " << cfg.train.learning_rate << "\n";
    os << "  max_epochs = " << cfg.train.max_epochs << "\n";
    os << "  patience = " << cfg.train.patience << "\n";
    for (const auto& m : r.methods) {
        std::vector<double> acc;
        std::vector<double> fdr;
        std::vector<std::vector<double>> per_class(static_cast<std::size_t>(cfg.classes));
        std::vector<std::vector<int>> confusion(static_cast<std::size_t>(cfg.classes),
                                                std::vector<int>(static_cast<std::size_t>(cfg.classes), 0));
        bool degenerate = false;
        for (const auto& run : m.runs) {
            acc.push_back(run.evaluation.accuracy);
            fdr.push_back(run.fdr.log_fdr);
            degenerate = degenerate || run.fdr.degenerate;
            for (std::size_t c = 0; c < per_class.size(); ++c) per_class[c].push_back(run.fdr.per_class_log_fdr[c]);
            for (std::size_t t = 0; t < confusion.size(); ++t) {
                for (std::size_t p = 0; p < confusion.size(); ++p) confusion[t][p] += run.evaluation.confusion[t][p];
            }
        }
        const auto a = summarize(acc);
        const auto f = summarize(fdr);
        os << "method " << to_string(m.method) << "\n";
        os << "  accuracy = " << fixed(a.mean, 3) << " ± " << fixed(a.stddev, 3) << "\n";
        os << "  accuracy_per_run =";
        for (double v : acc) os << ' ' << fixed(v, 4);
        os << "\n";
        os << "  epochs_per_run =";
        for (const auto& run : m.runs) os << ' ' << run.history.epochs.size();
        os << "\n";
        os << "  trainable_parameters = " << m.trainable_parameters << "\n";
        os << "  mixing_parameters = " << m.mixing_parameters << "\n";
        os << "  fdr\n";
        os << "    log_fdr = " << fixed(f.mean, 6) << " ± " << fixed(f.stddev, 6) << "\n";
        for (std::size_t c = 0; c < per_class.size(); ++c) {
            const auto pc = summarize(per_class[c]);
            os << "    class_" << c << " = " << fixed(pc.mean, 6) << " ± " << fixed(pc.stddev, 6) << "\n";
        }
        os << "    degenerate = " << (degenerate ? "true" : "false") << "\n";
        os << "  confusion (rows = true class, summed over runs)\n";
        for (std::size_t t = 0; t < confusion.size(); ++t) {
            os << "    " << t << ":";
            for (int v : confusion[t]) os << ' ' << v;
            os << "\n";
        }
    }
    return os.str();
}

inline void write_results(const ExperimentResult& r, const std::filesystem::path& path) {
    detail::write_all_bytes(path, format_results(r));
}

}  // namespace lacuna
