// lacuna: lacunarity heatmaps, gradient checks, texture generation and the
// desk-scale experiment runner.

#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lacuna/grad/check.hpp"
#include "lacuna/io/features.hpp"
#include "lacuna/io/pgm.hpp"
#include "lacuna/lacunarity/base.hpp"
#include "lacuna/lacunarity/dbc.hpp"
#include "lacuna/lacunarity/multiscale.hpp"
#include "lacuna/texture/experiment.hpp"
#include "lacuna/texture/generator.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kDivergence = 3, kGradFail = 4 };

struct LacmapArgs {
    std::string method = "base";
    int window = 3;
    int stride = 1;
    int scales = 2;
    std::vector<int> dilations{1, 2, 3};
    double epsilon = 1e-6;
    std::string input;
    std::string output;
};

lacuna::LacunarityConfig lacmap_config(const LacmapArgs& a) {
    using lacuna::LacunarityConfig;
    using lacuna::PoolSpec;
    const PoolSpec window = PoolSpec::square(a.window, a.stride);
    LacunarityConfig cfg;
    if (a.method == "base") {
        cfg = LacunarityConfig::base(window);
    } else if (a.method == "dbc") {
        cfg = LacunarityConfig::dbc(window, a.dilations);
    } else if (a.method == "ms") {
        cfg = LacunarityConfig::multiscale(window, a.scales);
    } else {
        throw lacuna::ConfigError("--method must be base, dbc or ms");
    }
    cfg.epsilon = a.epsilon;
    cfg.validate();
    return cfg;
}

lacuna::FeatureMap apply_operator(const lacuna::FeatureMap& x, const lacuna::LacunarityConfig& cfg) {
    using lacuna::LacunarityMethod;
    switch (cfg.method) {
        case LacunarityMethod::base: return lacuna::base_lacunarity(x, cfg);
        case LacunarityMethod::dbc: return lacuna::dbc_lacunarity(x, cfg);
        case LacunarityMethod::multiscale:
            return lacuna::multiscale_lacunarity(x, cfg, lacuna::GroupedMixWeights::uniform(x.channels(), cfg.scales));
    }
    return x;
}

int run_lacmap(const LacmapArgs& a) {
    lacuna::LacunarityConfig cfg;
    try {
        cfg = lacmap_config(a);
    } catch (const std::exception& e) {
        std::cerr << "lacmap: " << e.what() << '\n';
        return kUsage;
    }
    lacuna::FeatureMap image;
    try {
        image = lacuna::read_pgm(a.input);
    } catch (const std::exception& e) {
        std::cerr << "lacmap: " << e.what() << '\n';
        return kIo;
    }
    // Pixels go to [-1, 1] so the tanh scaling does not saturate.
    const lacuna::FeatureMap x = lacuna::map_values(image, [](double p) { return p / 127.5 - 1.0; });
    lacuna::FeatureMap heatmap;
    double global = 0.0;
    try {
        heatmap = apply_operator(x, cfg);
        lacuna::LacunarityConfig whole = cfg;
        whole.window_mode = lacuna::WindowMode::global;
        const auto g = apply_operator(x, whole);
        for (double v : g.data()) global += v;
        global /= static_cast<double>(g.size());
    } catch (const std::exception& e) {
        std::cerr << "lacmap: " << e.what() << '\n';
        return kUsage;
    }
    try {
        lacuna::write_pgm(heatmap, a.output);
    } catch (const std::exception& e) {
        std::cerr << "lacmap: " << e.what() << '\n';
        return kIo;
    }
    std::cout << std::fixed << std::setprecision(6) << global << '\n';
    return kOk;
}

int run_experiment_cmd(const std::string& config_path, const std::string& output) {
    lacuna::ExperimentConfig cfg;
    try {
        cfg = lacuna::load_experiment_config(config_path);
        if (!output.empty()) cfg.output = output;
    } catch (const lacuna::IoError& e) {
        std::cerr << "experiment: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "experiment: " << e.what() << "\nusage: lacuna experiment CONFIG (needs methods = a,b,...)\n";
        return kUsage;
    }
    try {
        const auto result = lacuna::run_experiment(cfg);
        lacuna::write_results(result, cfg.output);
        for (const auto& m : result.methods) {
            std::vector<double> acc;
            for (const auto& r : m.runs) acc.push_back(r.evaluation.accuracy);
            const auto s = lacuna::summarize(acc);
            std::cout << std::left << std::setw(12) << lacuna::to_string(m.method) << std::fixed
                      << std::setprecision(3) << s.mean << " ± " << s.stddev << '\n';
        }
        std::cout << "results written to " << cfg.output.string() << '\n';
    } catch (const lacuna::DivergenceError& e) {
        std::cerr << "experiment: " << e.what() << '\n';
        return kDivergence;
    } catch (const lacuna::IoError& e) {
        std::cerr << "experiment: " << e.what() << '\n';
        return kIo;
    } catch (const lacuna::FormatError& e) {
        std::cerr << "experiment: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "experiment: " << e.what() << '\n';
        return kUsage;
    }
    return kOk;
}

int run_gradcheck(int seeds, const std::string& sign_flip) {
    lacuna::GradSuiteOptions opt;
    opt.seeds = seeds;
    if (!sign_flip.empty()) {
        try {
            opt.sign_flip = lacuna::parse_op(sign_flip);
        } catch (const std::exception& e) {
            std::cerr << "gradcheck: " << e.what() << '\n';
            return kUsage;
        }
    }
    const bool ok = lacuna::print_gradcheck_table(std::cout, lacuna::run_gradcheck_suite(opt));
    return ok ? kOk : kGradFail;
}

lacuna::GapProfile parse_profile(const std::string& s) {
    if (s == "ordered") return lacuna::GapProfile::ordered;
    if (s == "matched") return lacuna::GapProfile::matched;
    throw lacuna::ConfigError("--profile must be ordered or matched");
}

int run_generate(const std::string& grade, int size, std::uint64_t seed, const std::string& profile,
                 const std::string& output) {
    lacuna::TextureSample sample;
    try {
        lacuna::GeneratorOptions opt;
        opt.profile = parse_profile(profile);
        sample = lacuna::generate_texture(lacuna::parse_grade(grade), size, seed, opt);
    } catch (const std::exception& e) {
        std::cerr << "generate: " << e.what() << '\n';
        return kUsage;
    }
    try {
        lacuna::write_pgm_verbatim(sample.image, output);
    } catch (const std::exception& e) {
        std::cerr << "generate: " << e.what() << '\n';
        return kIo;
    }
    std::cout << std::fixed << std::setprecision(6) << "single_window_lacunarity = "
              << lacuna::single_window_lacunarity(sample.image) << "\ngliding_box_lacunarity = "
              << lacuna::global_lacunarity(sample.image, lacuna::measurement_box(size))
              << "\nattempts = " << sample.attempts << '\n';
    return kOk;
}

int run_calibrate(int samples, int size, std::uint64_t seed, const std::string& profile) {
    try {
        const auto r = lacuna::calibrate_bands(size, samples, seed, parse_profile(profile));
        std::cout << std::setprecision(17) << "size = " << size << "\nbox = " << lacuna::measurement_box(size)
                  << "\nlow_medium = " << r.bands.low_medium << "\nmedium_high = " << r.bands.medium_high << '\n';
        for (lacuna::Grade g : lacuna::kGrades) {
            const auto& v = r.samples[static_cast<std::size_t>(g)];
            std::cout << std::setprecision(6) << lacuna::to_string(g) << ": min " << v.front() << " median "
                      << v[v.size() / 2] << " max " << v.back() << " in_band " << r.band_hit_rate[static_cast<std::size_t>(g)]
                      << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "calibrate: " << e.what() << '\n';
        return kUsage;
    }
    return kOk;
}

int run_features(int per_class, int size, std::uint64_t seed, int channels, std::uint64_t backbone_seed,
                 const std::string& out, const std::string& labels_out) {
    try {
        const auto data = lacuna::heterogeneity_dataset(per_class, size, seed);
        const lacuna::RandomConvBackbone backbone(backbone_seed, channels);
        lacuna::write_features(backbone.extract(data.inputs), out);
        lacuna::write_labels(data.labels, labels_out);
    } catch (const lacuna::IoError& e) {
        std::cerr << "features: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "features: " << e.what() << '\n';
        return kUsage;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lacunarity pooling toolkit"};
    app.require_subcommand(1);

    LacmapArgs lac;
    auto* lacmap = app.add_subcommand("lacmap", "Lacunarity heatmap of a PGM image");
    lacmap->add_option("--method", lac.method, "base, dbc or ms")->check(CLI::IsMember({"base", "dbc", "ms"}));
    lacmap->add_option("--window", lac.window, "Window side")->check(CLI::PositiveNumber);
    lacmap->add_option("--stride", lac.stride, "Window stride")->check(CLI::PositiveNumber);
    lacmap->add_option("--scales", lac.scales, "Pyramid levels (ms)")->check(CLI::PositiveNumber);
    lacmap->add_option("--dilations", lac.dilations, "Box heights r (dbc), comma separated")->delimiter(',');
    lacmap->add_option("--epsilon", lac.epsilon, "Denominator guard")->check(CLI::PositiveNumber);
    lacmap->add_option("input", lac.input, "Input PGM")->required();
    lacmap->add_option("output", lac.output, "Output heatmap PGM")->required();

    std::string config_path;
    std::string results_path;
    auto* experiment = app.add_subcommand("experiment", "Train and compare pooling methods");
    experiment->add_option("config", config_path, "key = value config file")->required();
    experiment->add_option("--output", results_path, "Results file (overrides config)");

    int grad_seeds = 20;
    std::string sign_flip;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every backward pass");
    gradcheck->add_option("--seeds", grad_seeds, "Seeds per op and window")->check(CLI::PositiveNumber);
    gradcheck->add_option("--inject-sign-flip", sign_flip, "Negate one op's gradient (mutation test)");

    std::string grade = "low";
    int size = 56;
    std::uint64_t seed = 0;
    std::string profile = "ordered";
    std::string texture_out;
    auto* generate = app.add_subcommand("generate", "Write one synthetic gap texture");
    generate->add_option("--grade", grade, "low, medium or high")->check(CLI::IsMember({"low", "medium", "high"}));
    generate->add_option("--size", size, "Image side (>= 32)");
    generate->add_option("--seed", seed, "Generator seed");
    generate->add_option("--profile", profile, "Gap area profile: ordered or matched");
    generate->add_option("output", texture_out, "Output PGM")->required();

    int samples = 1000;
    auto* calibrate = app.add_subcommand("calibrate", "Measure grade bands for the generator");
    calibrate->add_option("--samples", samples, "Draws per grade");
    calibrate->add_option("--size", size, "Image side");
    calibrate->add_option("--seed", seed, "Base seed");
    calibrate->add_option("--profile", profile, "Gap area profile: ordered or matched");

    int per_class = 100;
    int channels = 16;
    std::uint64_t backbone_seed = 0;
    std::string features_out;
    std::string labels_out;
    auto* features = app.add_subcommand("features", "Export backbone features of the texture dataset (LACF)");
    features->add_option("--samples-per-class", per_class, "Samples per grade");
    features->add_option("--size", size, "Image side");
    features->add_option("--seed", seed, "Dataset seed");
    features->add_option("--channels", channels, "Backbone output channels");
    features->add_option("--backbone-seed", backbone_seed, "Backbone seed");
    features->add_option("output", features_out, "Feature file")->required();
    features->add_option("labels", labels_out, "Labels file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    if (*lacmap) return run_lacmap(lac);
    if (*experiment) return run_experiment_cmd(config_path, results_path);
    if (*gradcheck) return run_gradcheck(grad_seeds, sign_flip);
    if (*generate) return run_generate(grade, size, seed, profile, texture_out);
    if (*calibrate) return run_calibrate(samples, size, seed, profile);
    if (*features) return run_features(per_class, size, seed, channels, backbone_seed, features_out, labels_out);
    return kUsage;
}
