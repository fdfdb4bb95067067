#include <gtest/gtest.h>

#include <random>

#include "lacuna/core/pooling.hpp"
#include "oracle.hpp"

using namespace lacuna;

namespace {

const FeatureMap kQuad({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});

FeatureMap run(oracle::Reduce op, const FeatureMap& x, const PoolSpec& s) {
    switch (op) {
        case oracle::Reduce::sum: return pool_sum(x, s);
        case oracle::Reduce::avg: return pool_avg(x, s);
        case oracle::Reduce::max: return pool_max(x, s);
        case oracle::Reduce::min: return pool_min(x, s);
        case oracle::Reduce::l2: return pool_l2(x, s);
    }
    return x;
}

}  // namespace

TEST(Pooling, TwoByTwoExamples) {
    const auto k2 = PoolSpec::square(2);
    EXPECT_EQ(pool_sum(kQuad, k2).data()[0], 10.0);
    EXPECT_EQ(pool_avg(kQuad, k2).data()[0], 2.5);
    EXPECT_EQ(pool_max(kQuad, k2).data()[0], 4.0);
    EXPECT_EQ(pool_min(kQuad, k2).data()[0], 1.0);
    EXPECT_DOUBLE_EQ(pool_l2(FeatureMap({1, 1, 2, 2}, std::vector<double>{3, 4, 0, 0}), k2).data()[0], 2.5);
}

TEST(Pooling, ConstantAndZeroMaps) {
    const FeatureMap c({2, 2, 6, 5}, 3.5);
    const FeatureMap z({2, 2, 6, 5}, 0.0);
    const auto spec = PoolSpec::square(3, 2, 1, 0);
    {
        const FeatureMap held = pool_avg(c, spec);
        for (double v : held.data()) EXPECT_DOUBLE_EQ(v, 3.5);
    }
    {
        const FeatureMap held = pool_max(c, spec);
        for (double v : held.data()) EXPECT_EQ(v, 3.5);
    }
    {
        const FeatureMap held = pool_min(c, spec);
        for (double v : held.data()) EXPECT_EQ(v, 3.5);
    }
    {
        const FeatureMap held = pool_l2(c, spec);
        for (double v : held.data()) EXPECT_NEAR(v, 3.5, 1e-15);
    }
    {
        const FeatureMap held = pool_sum(z, spec);
        for (double v : held.data()) EXPECT_EQ(v, 0.0);
    }
    {
        const FeatureMap held = pool_l2(z, spec);
        for (double v : held.data()) EXPECT_EQ(v, 0.0);
    }
}

TEST(Pooling, OutputShapeFormula) {
    const FeatureMap x({1, 1, 9, 7});
    const PoolSpec s{3, 2, 2, 1, 2, 1};
    // H' = floor((9 + 2 - 2*2 - 1)/2) + 1 = 4, W' = floor((7 + 2 - 2*1 - 1)/1) + 1 = 7
    EXPECT_EQ(pool_sum(x, s).shape(), (Shape{1, 1, 4, 7}));
}

TEST(Pooling, InvalidSpecsThrow) {
    const FeatureMap x({1, 1, 4, 4});
    EXPECT_THROW(pool_sum(x, PoolSpec::square(5)), ShapeError);
    EXPECT_THROW(pool_sum(x, PoolSpec::square(3, 1, 2)), ShapeError);
    EXPECT_THROW(pool_sum(x, PoolSpec::square(2, 0)), ShapeError);
    EXPECT_THROW(pool_sum(x, PoolSpec::square(2, 1, 1, 2)), ShapeError);
}

TEST(Pooling, RandomFourByFourSumMatchesOracle) {
    std::mt19937_64 gen(1);
    const FeatureMap x = oracle::random_map(gen, {1, 1, 4, 4}, -5, 5);
    const FeatureMap y = pool_sum(x, PoolSpec::square(2, 2));
    const FeatureMap r = oracle::pool(x, {2, 2, 2, 2, 1, 0}, oracle::Reduce::sum);
    ASSERT_EQ(y.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_LE(oracle::rel_diff(y.data()[i], r.data()[i]), 1e-12);
}

TEST(Pooling, DilatedMaxReadsEveryOtherCell) {
    const FeatureMap x({1, 1, 3, 3}, std::vector<double>{1, 100, 2, 100, 100, 100, 3, 100, 4});
    EXPECT_EQ(pool_max(x, PoolSpec::square(2, 1, 2)).data()[0], 4.0);
    EXPECT_EQ(pool_min(x, PoolSpec::square(2, 1, 2)).data()[0], 1.0);
}

// Randomized sweep against the nested-loop reference.
TEST(Pooling, RandomSweepMatchesOracle) {
    std::mt19937_64 gen(2024);
    int checked = 0;
    while (checked < 200) {
        const int kh = 1 + static_cast<int>(gen() % 4);
        const int kw = 1 + static_cast<int>(gen() % 4);
        const int dil = 1 + static_cast<int>(gen() % 3);
        const int pad = static_cast<int>(gen() % (std::min(kh, kw) / 2 + 1));
        const PoolSpec s{kh, kw, 1 + static_cast<int>(gen() % 3), 1 + static_cast<int>(gen() % 3), dil, pad};
        const Shape shape{1 + static_cast<int>(gen() % 2), 1 + static_cast<int>(gen() % 3),
                          3 + static_cast<int>(gen() % 8), 3 + static_cast<int>(gen() % 8)};
        if (s.extent_h() > shape.h + 2 * pad || s.extent_w() > shape.w + 2 * pad) continue;
        const bool integer = gen() % 2 == 0;
        FeatureMap x = oracle::random_map(gen, shape, -10, 10);
        if (integer) {
            for (double& v : x.data()) v = std::round(v);
        }
        const oracle::Window w{kh, kw, s.stride_h, s.stride_w, dil, pad};
        for (auto op : {oracle::Reduce::sum, oracle::Reduce::avg, oracle::Reduce::max, oracle::Reduce::min,
                        oracle::Reduce::l2}) {
            const FeatureMap got = run(op, x, s);
            const FeatureMap want = oracle::pool(x, w, op);
            ASSERT_EQ(got.shape(), want.shape());
            const bool exact = op == oracle::Reduce::max || op == oracle::Reduce::min ||
                               (integer && op == oracle::Reduce::sum);
            for (std::size_t i = 0; i < got.size(); ++i) {
                if (exact) {
                    ASSERT_EQ(got.data()[i], want.data()[i]);
                } else {
                    ASSERT_LE(oracle::rel_diff(got.data()[i], want.data()[i]), 1e-12);
                }
            }
        }
        ++checked;
    }
}

TEST(Pooling, MaxAvgMinOrdering) {
    std::mt19937_64 gen(77);
    for (int t = 0; t < 30; ++t) {
        const FeatureMap x = oracle::random_map(gen, {1, 2, 7, 6}, -3, 3);
        const auto s = PoolSpec::square(1 + t % 3, 1 + t % 2, 1 + t % 2);
        const FeatureMap mx = pool_max(x, s);
        const FeatureMap av = pool_avg(x, s);
        const FeatureMap mn = pool_min(x, s);
        for (std::size_t i = 0; i < mx.size(); ++i) {
            EXPECT_GE(mx.data()[i], av.data()[i] - 1e-12);
            EXPECT_GE(av.data()[i], mn.data()[i] - 1e-12);
        }
    }
}

TEST(Pooling, SumIsLinear) {
    std::mt19937_64 gen(8);
    const FeatureMap x = oracle::random_map(gen, {2, 2, 6, 6}, -1, 1);
    const FeatureMap y = oracle::random_map(gen, {2, 2, 6, 6}, -1, 1);
    const auto s = PoolSpec::square(3, 1, 1, 1);
    const double alpha = 1.7;
    const double beta = -0.3;
    const FeatureMap lhs = pool_sum(add(scale(x, alpha), scale(y, beta)), s);
    const FeatureMap rhs = add(scale(pool_sum(x, s), alpha), scale(pool_sum(y, s), beta));
    EXPECT_LE(max_abs_diff(lhs, rhs), 1e-12);
}

TEST(Pooling, GlobalAveragePool) {
    const FeatureMap x({2, 1, 2, 2}, std::vector<double>{1, 2, 3, 4, -1, -1, -1, 3});
    const FeatureMap g = global_avg_pool(x);
    EXPECT_EQ(g.shape(), (Shape{2, 1, 1, 1}));
    EXPECT_DOUBLE_EQ(g.data()[0], 2.5);
    EXPECT_DOUBLE_EQ(g.data()[1], 0.0);
}
