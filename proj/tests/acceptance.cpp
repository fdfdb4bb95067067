// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "lacuna/grad/check.hpp"
#include "lacuna/io/pgm.hpp"
#include "lacuna/model/fdr.hpp"
#include "lacuna/texture/experiment.hpp"
#include "lacuna/texture/generator.hpp"
#include "oracle.hpp"

using namespace lacuna;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::ostringstream t;
    t.setf(std::ios::fixed);
    t.precision(1);
    t << secs;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  [" << o.detail << "; " << t.str() << " s]"
              << std::endl;
}

int run_cli(const std::string& args) {
    const int status = std::system((std::string(LACUNA_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

Outcome mixing_parameter_counts() {
    const std::pair<int, long long> rows[] = {{512, 1536}, {768, 2304}, {2208, 6624}};
    std::string detail;
    bool ok = true;
    for (const auto& [c, want] : rows) {
        const long long formula = param_count(c, 2);
        const auto layer = static_cast<long long>(GroupedMixWeights::uniform(c, 2).parameter_count());
        ok = ok && formula == want && layer == want;
        detail += "C=" + std::to_string(c) + ":" + std::to_string(layer) + " ";
    }
    return {ok, detail + "expected 1536/2304/6624"};
}

Outcome moment_equivalence() {
    std::mt19937_64 gen(1001);
    double worst = 0.0;
    int windows = 0;
    for (int k : {2, 3, 5, 7}) {
        for (int t = 0; t < 250; ++t) {
            const FeatureMap x = oracle::random_map(gen, {1, 1, k, k}, 0.5, 255.0);
            LacunarityConfig cfg = LacunarityConfig::base(PoolSpec::square(k));
            cfg.normalize_input = false;
            const double got = base_lacunarity(x, cfg).data()[0];
            const std::vector<double> cells(x.data().begin(), x.data().end());
            worst = std::max(worst, oracle::rel_diff(got, oracle::variance_over_mean_sq(cells)));
            ++windows;
        }
    }
    return {windows == 1000 && worst <= 1e-9, std::to_string(windows) + " windows, max rel " + sci(worst)};
}

Outcome pooling_sweep() {
    std::mt19937_64 gen(2024);
    int combos = 0;
    double worst = 0.0;
    bool exact_ok = true;
    while (combos < 200) {
        const int kh = 1 + static_cast<int>(gen() % 4);
        const int kw = 1 + static_cast<int>(gen() % 4);
        const int dil = 1 + static_cast<int>(gen() % 3);
        const int pad = static_cast<int>(gen() % (std::min(kh, kw) / 2 + 1));
        const PoolSpec s{kh, kw, 1 + static_cast<int>(gen() % 3), 1 + static_cast<int>(gen() % 3), dil, pad};
        const Shape shape{1 + static_cast<int>(gen() % 2), 1 + static_cast<int>(gen() % 3),
                          4 + static_cast<int>(gen() % 8), 4 + static_cast<int>(gen() % 8)};
        if (s.extent_h() > shape.h + 2 * pad || s.extent_w() > shape.w + 2 * pad) continue;
        const bool integer = gen() % 2 == 0;
        FeatureMap x = oracle::random_map(gen, shape, 0.0, 255.0);
        if (integer) {
            for (double& v : x.data()) v = std::round(v);
        }
        const oracle::Window w{kh, kw, s.stride_h, s.stride_w, dil, pad};
        const std::pair<oracle::Reduce, FeatureMap (*)(const FeatureMap&, const PoolSpec&)> ops[] = {
            {oracle::Reduce::sum, pool_sum}, {oracle::Reduce::avg, pool_avg}, {oracle::Reduce::max, pool_max},
            {oracle::Reduce::min, pool_min}, {oracle::Reduce::l2, pool_l2}};
        for (const auto& [op, fn] : ops) {
            const FeatureMap got = fn(x, s);
            const FeatureMap want = oracle::pool(x, w, op);
            if (got.shape() != want.shape()) return {false, "shape mismatch"};
            const bool exact =
                op == oracle::Reduce::max || op == oracle::Reduce::min || (integer && op == oracle::Reduce::sum);
            for (std::size_t i = 0; i < got.size(); ++i) {
                if (exact) {
                    exact_ok = exact_ok && got.data()[i] == want.data()[i];
                } else {
                    worst = std::max(worst, oracle::rel_diff(got.data()[i], want.data()[i]));
                }
            }
        }
        // Column heights: square window no larger than the map, box r inside it.
        const int k = 1 + static_cast<int>(gen() % static_cast<std::uint64_t>(std::min(shape.h, shape.w)));
        const int r = 1 + static_cast<int>(gen() % static_cast<std::uint64_t>(k));
        FeatureMap img = x;
        for (double& v : img.data()) v = std::round(v);
        const bool clamp = gen() % 4 == 0;
        const DbcStats st = dbc_column_heights(img, r, PoolSpec::square(k), clamp);
        for (int n = 0; n < shape.n; ++n) {
            for (int c = 0; c < shape.c; ++c) {
                for (int i = 0; i < st.heights.height(); ++i) {
                    for (int j = 0; j < st.heights.width(); ++j) {
                        exact_ok = exact_ok && st.heights(n, c, i, j) == oracle::column_height(img, n, c, i, j, r, clamp);
                    }
                }
            }
        }
        ++combos;
    }
    const bool ok = exact_ok && worst <= 1e-12;
    return {ok, std::to_string(combos) + " specs, exact cases " + (exact_ok ? "equal" : "DIFFER") +
                    ", max rel " + sci(worst)};
}

Outcome gradient_suite() {
    const auto rows = run_gradcheck_suite();
    double worst = 0.0;
    bool ok = true;
    int checks = 0;
    for (const auto& r : rows) {
        worst = std::max(worst, r.worst.max_rel_error);
        ok = ok && r.worst.pass;
        checks += r.checks;
    }
    const int code = run_cli("gradcheck");
    return {ok && code == 0, std::to_string(checks) + " checks over 20 seeds, max rel " + sci(worst) +
                                 ", gradcheck exit " + std::to_string(code)};
}

Outcome multiscale_collapse() {
    std::mt19937_64 gen(55);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const int k = 2 + t % 3;
        const Shape s{1 + t % 2, 1 + t % 3, k + 2 + t % 5, k + 1 + t % 4};
        const FeatureMap x = oracle::random_map(gen, s, -2.0, 2.0);
        const auto window = PoolSpec::square(k, 1 + t % 2);
        const FeatureMap ms =
            multiscale_lacunarity(x, LacunarityConfig::multiscale(window, 1), GroupedMixWeights::identity(s.c));
        const FeatureMap base = base_lacunarity(x, LacunarityConfig::base(window));
        if (ms.shape() != base.shape()) return {false, "shape mismatch"};
        worst = std::max(worst, max_abs_diff(ms, base));
    }
    return {worst <= 1e-12, "50 inputs, max abs " + sci(worst)};
}

Outcome generator_ordering() {
    int ordered = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        double v[3];
        for (Grade g : kGrades) v[static_cast<int>(g)] = global_lacunarity(generate_texture(g, 56, seed).image, 7);
        if (v[0] < v[1] && v[1] < v[2]) ++ordered;
    }
    return {ordered == 100, std::to_string(ordered) + "/100 seeds strictly ordered"};
}

Outcome training_smoke() {
    ExperimentConfig cfg;
    cfg.methods = {PoolingMethod::avg, PoolingMethod::multiscale};
    cfg.dataset = DatasetKind::heterogeneity;
    cfg.samples_per_class = 100;
    cfg.image_size = 56;
    cfg.runs = 5;
    const auto r = run_experiment(cfg);
    const auto mean_of = [](const MethodResult& m) {
        double s = 0.0;
        for (const auto& run : m.runs) s += run.evaluation.accuracy;
        return s / static_cast<double>(m.runs.size());
    };
    const MethodResult& avg = r.methods[0];
    const MethodResult& ms = r.methods[1];
    int above = 0;
    std::string per_run;
    for (const auto& run : ms.runs) {
        above += run.evaluation.accuracy >= 0.9 ? 1 : 0;
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.3f ", run.evaluation.accuracy);
        per_run += buf;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "multiscale runs %s(%d/5 >= 0.90), mean %.3f vs avg %.3f", per_run.c_str(), above,
                  mean_of(ms), mean_of(avg));
    return {above >= 4 && mean_of(ms) >= mean_of(avg), buf};
}

Outcome results_determinism() {
    const fs::path dir = fs::temp_directory_path() / "lacuna_acceptance";
    fs::create_directories(dir);
    std::ofstream(dir / "exp.cfg") << "methods = avg, max, l2, base, dbc, multiscale\n"
                                      "dataset = heterogeneity\nsamples_per_class = 10\nruns = 2\n"
                                      "max_epochs = 15\npatience = 5\n";
    const std::string cfg = (dir / "exp.cfg").string();
    const int a = run_cli("experiment " + cfg + " --output " + (dir / "a.txt").string());
    const int b = run_cli("experiment " + cfg + " --output " + (dir / "b.txt").string());
    const bool same = a == 0 && b == 0 && detail::read_all_bytes(dir / "a.txt") == detail::read_all_bytes(dir / "b.txt");
    const auto size = a == 0 ? fs::file_size(dir / "a.txt") : 0;
    fs::remove_all(dir);
    return {same, "exit codes " + std::to_string(a) + "/" + std::to_string(b) + ", " + std::to_string(size) +
                      " bytes " + (same ? "identical" : "DIFFER")};
}

Outcome fdr_metric() {
    std::mt19937_64 gen(77);
    std::normal_distribution<double> d;
    double worst_oracle = 0.0;
    double worst_rotation = 0.0;
    for (int t = 0; t < 10; ++t) {
        const int n = 12 + t;
        const int dims = 2 + t % 3;
        FeatureMap f({n, dims, 1, 1});
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) {
            const int c = i % 3;
            labels.push_back(c);
            for (int k = 0; k < dims; ++k) f(i, k, 0, 0) = 1.5 * c * (k + 1) + d(gen);
        }
        // Explicit scatter sums.
        std::vector<double> mean(static_cast<std::size_t>(dims), 0.0);
        std::vector<std::vector<double>> cm(3, std::vector<double>(static_cast<std::size_t>(dims), 0.0));
        std::vector<int> cn(3, 0);
        for (int i = 0; i < n; ++i) {
            ++cn[static_cast<std::size_t>(labels[i])];
            for (int k = 0; k < dims; ++k) {
                mean[k] += f(i, k, 0, 0) / n;
                cm[labels[i]][k] += f(i, k, 0, 0);
            }
        }
        double between = 0.0;
        double within = 0.0;
        for (int c = 0; c < 3; ++c) {
            for (int k = 0; k < dims; ++k) {
                cm[c][k] /= cn[c];
                between += cn[c] * (cm[c][k] - mean[k]) * (cm[c][k] - mean[k]);
            }
        }
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < dims; ++k) within += std::pow(f(i, k, 0, 0) - cm[labels[i]][k], 2);
        }
        const auto rep = fisher_discriminant_ratio(f, labels, 3);
        worst_oracle = std::max(worst_oracle, std::abs(rep.log_fdr - std::log(between / within)));

        // Rotation of the first two coordinates.
        const double a = 0.37 * (t + 1);
        FeatureMap rot = f;
        for (int i = 0; i < n; ++i) {
            const double x = f(i, 0, 0, 0);
            const double y = f(i, 1, 0, 0);
            rot(i, 0, 0, 0) = std::cos(a) * x - std::sin(a) * y;
            rot(i, 1, 0, 0) = std::sin(a) * x + std::cos(a) * y;
        }
        const auto rr = fisher_discriminant_ratio(rot, labels, 3);
        worst_rotation = std::max(worst_rotation, std::abs(rr.log_fdr - rep.log_fdr));
    }
    return {worst_oracle <= 1e-9 && worst_rotation <= 1e-9,
            "oracle max diff " + sci(worst_oracle) + ", rotation max diff " + sci(worst_rotation)};
}

}  // namespace

int main() {
    criterion("mixing-layer parameter counts (exact)", mixing_parameter_counts);
    criterion("base lacunarity equals variance over squared mean (1e-9 rel)", moment_equivalence);
    criterion("pooling and column heights match nested loops (exact / 1e-12 rel)", pooling_sweep);
    criterion("gradient suite at 1e-4 rel over 20 seeds", gradient_suite);
    criterion("single-scale multiscale equals base lacunarity (1e-12)", multiscale_collapse);
    criterion("texture grades ordered for 100 seeds", generator_ordering);
    criterion("heterogeneity training: multiscale >= 0.90 on 4/5 seeds, mean >= avg", training_smoke);
    criterion("experiment results byte-identical across reruns", results_determinism);
    criterion("Fisher ratio matches scatter sums and is rotation invariant (1e-9)", fdr_metric);
    std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria FAILED")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
