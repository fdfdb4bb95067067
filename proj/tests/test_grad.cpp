#include <gtest/gtest.h>

#include <random>

#include "lacuna/grad/check.hpp"
#include "oracle.hpp"

using namespace lacuna;

namespace {

GradCheckReport check_op(OpId id, const PoolSpec& window, std::uint64_t seed, GradCheckOptions opt = {}) {
    auto [params, inputs] = gradcheck_case(id, window, seed);
    opt.seed = seed + 1;
    return finite_diff_check(make_kernel(id, params), std::move(inputs), opt);
}

}  // namespace

TEST(Backward, TanhScaleSlopeAtZero) {
    const FeatureMap x({1, 1, 1, 1}, 0.0);
    const Gradient g = tanh_scale_backward(x, FeatureMap({1, 1, 1, 1}, 1.0));
    EXPECT_DOUBLE_EQ(g.data()[0], 127.5);
}

TEST(Backward, PoolSumCountsWindowMembership) {
    const Shape in{1, 1, 5, 5};
    const auto spec = PoolSpec::square(3, 1);
    const FeatureMap x(in, 1.0);
    const Gradient g = pool_sum_backward(in, spec, FeatureMap(pool_sum(x, spec).shape(), 1.0));
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            const int rows = std::min(i, 2) - std::max(0, i - 2) + 1;
            const int cols = std::min(j, 2) - std::max(0, j - 2) + 1;
            EXPECT_EQ(g(0, 0, i, j), rows * cols);
        }
    }
}

TEST(Backward, BaseLacunarityTwoByTwoMatchesDifferences) {
    std::mt19937_64 gen(21);
    OpParams p;
    p.lacunarity = LacunarityConfig::base(PoolSpec::square(2));
    GradCheckOptions opt;
    opt.tolerance = 1e-6;
    opt.probes = 200;
    const auto r = finite_diff_check(make_kernel(OpId::base_lacunarity, p),
                                     {oracle::random_map(gen, {1, 1, 5, 5}, -1.0, 1.0)}, opt);
    EXPECT_TRUE(r.pass) << r.max_rel_error;
}

TEST(Backward, MaxPoolTieGoesToFirstCell) {
    const FeatureMap x({1, 1, 2, 2}, std::vector<double>{3, 3, 3, 1});
    const Gradient g = pool_max_backward(x, PoolSpec::square(2), FeatureMap({1, 1, 1, 1}, 2.0));
    EXPECT_EQ(g, FeatureMap({1, 1, 2, 2}, std::vector<double>{2, 0, 0, 0}));
}

TEST(Backward, MaxPoolConservesMassOnPartitions) {
    std::mt19937_64 gen(22);
    for (int k : {1, 2, 3}) {
        const FeatureMap x = oracle::random_map(gen, {2, 2, 6, 6}, -1, 1);
        const auto spec = PoolSpec::square(k, k);
        const FeatureMap up = oracle::random_map(gen, pool_max(x, spec).shape(), -1, 1);
        const Gradient g = pool_max_backward(x, spec, up);
        double gin = 0.0;
        double gup = 0.0;
        for (double v : g.data()) gin += v;
        for (double v : up.data()) gup += v;
        EXPECT_NEAR(gin, gup, 1e-12);
    }
}

TEST(Backward, ElementwiseProductRuleIsExact) {
    std::mt19937_64 gen(23);
    const FeatureMap a = oracle::random_map(gen, {2, 3, 4, 4}, -1, 1);
    const FeatureMap b = oracle::random_map(gen, {2, 3, 4, 4}, -1, 1);
    const FeatureMap up = oracle::random_map(gen, {2, 3, 4, 4}, -1, 1);
    const auto [ga, gb] = elementwise_mul_backward(a, b, up);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(ga.data()[i], up.data()[i] * b.data()[i]);
        EXPECT_EQ(gb.data()[i], up.data()[i] * a.data()[i]);
    }
}

TEST(Backward, DispatchErrors) {
    EXPECT_THROW(parse_op("dbc_lacunarity"), ConfigError);
    EXPECT_EQ(parse_op("pool_max"), OpId::pool_max);
    const std::vector<FeatureMap> one{FeatureMap({1, 1, 2, 2})};
    EXPECT_THROW(backward(OpId::mix_scales, OpParams{}, one, FeatureMap({1, 1, 1, 1})), ShapeError);
    EXPECT_THROW(backward(OpId::pool_sum, OpParams{}, one, FeatureMap({1, 1, 2, 2})), ShapeError);
}

TEST(FiniteDiff, LinearPoolSumIsExactToRoundoff) {
    for (const auto& wc : gradcheck_window_cases()) {
        GradCheckOptions opt;
        opt.tolerance = 1e-9;
        const auto r = check_op(OpId::pool_sum, wc.window, 5, opt);
        EXPECT_TRUE(r.pass) << wc.label << ' ' << r.max_rel_error;
        EXPECT_GE(r.probe_count, 100);
    }
}

TEST(FiniteDiff, BaseLacunarityOnPositiveInput) {
    std::mt19937_64 gen(24);
    OpParams p;
    p.lacunarity = LacunarityConfig::base(PoolSpec::square(3));
    const auto r =
        finite_diff_check(make_kernel(OpId::base_lacunarity, p), {oracle::random_map(gen, {1, 2, 6, 6}, 0.1, 2.0)});
    EXPECT_TRUE(r.pass) << r.max_rel_error;
}

TEST(FiniteDiff, MultiscaleIncludingMixingWeights) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto r = check_op(OpId::multiscale_lacunarity, PoolSpec::square(2), seed);
        EXPECT_TRUE(r.pass) << r.max_rel_error;
        EXPECT_LE(r.resamples, 10);
    }
}

TEST(FiniteDiff, SignFlipIsCaught) {
    auto [params, inputs] = gradcheck_case(OpId::base_lacunarity, PoolSpec::square(2), 3);
    const auto r = finite_diff_check(with_sign_flip(make_kernel(OpId::base_lacunarity, params)), inputs);
    EXPECT_FALSE(r.pass);
    EXPECT_GT(r.max_rel_error, 1.0);
}

TEST(FiniteDiff, ReportPassMatchesTolerance) {
    const auto r = check_op(OpId::pool_l2, PoolSpec::square(2), 9);
    GradCheckOptions tight;
    tight.tolerance = r.max_rel_error;
    const auto again = check_op(OpId::pool_l2, PoolSpec::square(2), 9, tight);
    EXPECT_EQ(again.max_rel_error, r.max_rel_error);
    EXPECT_FALSE(again.pass);
}

TEST(GradSuite, EveryOpPassesOnFewSeeds) {
    GradSuiteOptions opt;
    opt.seeds = 3;
    const auto rows = run_gradcheck_suite(opt);
    EXPECT_EQ(rows.size(), kAllOps.size() * gradcheck_window_cases().size());
    for (const auto& row : rows) {
        EXPECT_TRUE(row.worst.pass) << op_name(row.op) << ' ' << row.window << ' ' << row.worst.max_rel_error;
    }
}

TEST(ParamCount, TableValues) {
    EXPECT_EQ(param_count(512, 2), 1536);
    EXPECT_EQ(param_count(768, 2), 2304);
    EXPECT_EQ(param_count(2208, 2), 6624);
    EXPECT_THROW(param_count(0, 2), ConfigError);
}

TEST(ParamCount, MatchesConstructedLayer) {
    for (int c = 1; c <= 64; c += 7) {
        for (int s = 1; s <= 4; ++s) {
            const auto w = GroupedMixWeights::uniform(c, s);
            EXPECT_EQ(static_cast<std::size_t>(param_count(c, s)), w.weights.size() + w.bias.size());
        }
    }
}
