#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "lacuna/core/linear.hpp"
#include "lacuna/core/mixing.hpp"
#include "lacuna/core/rng.hpp"
#include "lacuna/core/tensor.hpp"
#include "oracle.hpp"

using namespace lacuna;

TEST(FeatureMap, StoresRowMajorNchw) {
    FeatureMap m({2, 3, 4, 5});
    EXPECT_EQ(m.size(), 120u);
    EXPECT_EQ(m.index(1, 2, 3, 4), 119u);
    EXPECT_EQ(m.index(0, 1, 0, 0), 20u);
    m(1, 0, 2, 3) = 7.0;
    EXPECT_EQ(m.data()[m.index(1, 0, 2, 3)], 7.0);
    EXPECT_EQ(m.plane(1, 0)[2 * 5 + 3], 7.0);
}

TEST(FeatureMap, RejectsBadShapesAndValues) {
    EXPECT_THROW(FeatureMap({0, 1, 1, 1}), ShapeError);
    EXPECT_THROW(FeatureMap({1, 1, -2, 1}), ShapeError);
    EXPECT_THROW(FeatureMap({1, 1, 2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
    EXPECT_THROW(FeatureMap({1, 1, 1, 2}, std::vector<double>{1, std::nan("")}), NonFiniteError);
    EXPECT_THROW(FeatureMap({1, 1, 1, 1}, std::numeric_limits<double>::infinity()), NonFiniteError);
}

TEST(FeatureMap, ArithmeticHelpers) {
    const FeatureMap a({1, 1, 1, 3}, std::vector<double>{1, 2, 3});
    const FeatureMap b({1, 1, 1, 3}, std::vector<double>{4, 5, 6});
    EXPECT_EQ(add(a, b), FeatureMap({1, 1, 1, 3}, std::vector<double>{5, 7, 9}));
    EXPECT_EQ(scale(a, 2.0), FeatureMap({1, 1, 1, 3}, std::vector<double>{2, 4, 6}));
    EXPECT_EQ(square(b), FeatureMap({1, 1, 1, 3}, std::vector<double>{16, 25, 36}));
    EXPECT_DOUBLE_EQ(max_abs_diff(a, b), 3.0);
    EXPECT_THROW(add(a, FeatureMap({1, 1, 3, 1})), ShapeError);
}

TEST(FeatureMap, ConcatChannelsKeepsOrder) {
    const FeatureMap a({2, 1, 1, 2}, std::vector<double>{1, 2, 3, 4});
    const FeatureMap b({2, 2, 1, 2}, std::vector<double>{5, 6, 7, 8, 9, 10, 11, 12});
    const std::vector<FeatureMap> parts{a, b};
    const FeatureMap c = concat_channels(parts);
    EXPECT_EQ(c.shape(), (Shape{2, 3, 1, 2}));
    EXPECT_EQ(c, FeatureMap({2, 3, 1, 2}, std::vector<double>{1, 2, 5, 6, 7, 8, 3, 4, 9, 10, 11, 12}));
}

TEST(Rng, IsDeterministicPerSeed) {
    Rng a(42);
    Rng b(42);
    Rng c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        EXPECT_EQ(x, b.uniform());
        differs = differs || x != c.uniform();
        EXPECT_GE(x, 0.0);
        EXPECT_LT(x, 1.0);
    }
    EXPECT_TRUE(differs);
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
}

TEST(Rng, BelowStaysInRangeAndNormalHasUnitScale) {
    Rng r(7);
    double mean = 0.0;
    double sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        EXPECT_LT(r.below(7), 7u);
        const double z = r.normal();
        mean += z;
        sq += z * z;
    }
    mean /= n;
    EXPECT_NEAR(mean, 0.0, 0.05);
    EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Bilinear, ConstantStaysConstant) {
    const FeatureMap x({1, 2, 3, 5}, 4.25);
    const FeatureMap y = upsample_bilinear(x, 7, 2);
    EXPECT_EQ(y.shape(), (Shape{1, 2, 7, 2}));
    for (double v : y.data()) EXPECT_NEAR(v, 4.25, 1e-12);
}

TEST(Bilinear, IdentityWhenTargetMatches) {
    std::mt19937_64 gen(3);
    const FeatureMap x = oracle::random_map(gen, {2, 2, 4, 6}, -1, 1);
    EXPECT_LE(max_abs_diff(upsample_bilinear(x, 4, 6), x), 1e-12);
}

TEST(Bilinear, RampMatchesHandOracle) {
    const FeatureMap x({1, 1, 2, 2}, std::vector<double>{0, 1, 0, 1});
    const FeatureMap y = upsample_bilinear(x, 4, 4);
    // Source columns for targets 0..3: max(0, (j + 0.5) / 2 - 0.5) = 0, 0.25, 0.75, 1.25 (clamped to 1).
    const double ramp[4] = {0.0, 0.25, 0.75, 1.0};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) EXPECT_NEAR(y(0, 0, i, j), ramp[j], 1e-12);
    }
}

TEST(Bilinear, MatchesOracleAndPreservesRange) {
    std::mt19937_64 gen(11);
    for (int t = 0; t < 20; ++t) {
        const int h = 1 + static_cast<int>(gen() % 6);
        const int w = 1 + static_cast<int>(gen() % 6);
        const int th = 1 + static_cast<int>(gen() % 9);
        const int tw = 1 + static_cast<int>(gen() % 9);
        const FeatureMap x = oracle::random_map(gen, {1, 2, h, w}, -3, 3);
        const FeatureMap y = upsample_bilinear(x, th, tw);
        EXPECT_LE(max_abs_diff(y, oracle::resize_bilinear(x, th, tw)), 1e-12);
        const auto [lo, hi] = std::minmax_element(x.data().begin(), x.data().end());
        for (double v : y.data()) {
            EXPECT_GE(v, *lo - 1e-12);
            EXPECT_LE(v, *hi + 1e-12);
        }
    }
}

TEST(MixScales, IdentityAndBiasOnly) {
    std::mt19937_64 gen(5);
    const FeatureMap x = oracle::random_map(gen, {2, 3, 4, 4}, -1, 1);
    EXPECT_EQ(mix_scales(x, GroupedMixWeights::identity(3)), x);

    const GroupedMixWeights zero(3, 2, std::vector<double>(6, 0.0), {1.5, -2.0, 0.25});
    const FeatureMap y = mix_scales(oracle::random_map(gen, {1, 6, 2, 2}, -1, 1), zero);
    for (int c = 0; c < 3; ++c) {
        for (double v : y.plane(0, c)) EXPECT_EQ(v, zero.bias[static_cast<std::size_t>(c)]);
    }
}

TEST(MixScales, MatchesPerCellDotProduct) {
    std::mt19937_64 gen(9);
    const FeatureMap planes = oracle::random_map(gen, {2, 4, 3, 3}, -1, 1);
    const GroupedMixWeights w(2, 2, {0.3, -1.2, 2.0, 0.7}, {0.1, -0.4});
    const FeatureMap y = mix_scales(planes, w);
    for (int n = 0; n < 2; ++n) {
        for (int c = 0; c < 2; ++c) {
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    const double expect = w.weights[c * 2] * planes(n, 2 * c, i, j) +
                                          w.weights[c * 2 + 1] * planes(n, 2 * c + 1, i, j) + w.bias[c];
                    EXPECT_NEAR(y(n, c, i, j), expect, 1e-12);
                }
            }
        }
    }
}

TEST(MixScales, ChannelMismatchThrows) {
    EXPECT_THROW(mix_scales(FeatureMap({1, 5, 2, 2}), GroupedMixWeights::uniform(2, 2)), ShapeError);
    EXPECT_THROW(GroupedMixWeights(2, 2, {1, 2, 3}, {0, 0}), ShapeError);
}

TEST(MixScales, ParameterCountIsCSPlusC) {
    for (int c = 1; c <= 40; c += 3) {
        for (int s = 1; s <= 5; ++s) {
            EXPECT_EQ(GroupedMixWeights::uniform(c, s).parameter_count(), static_cast<std::size_t>(c * s + c));
        }
    }
}

TEST(ElementwiseMul, IdentityZeroAndBroadcast) {
    std::mt19937_64 gen(2);
    const FeatureMap a = oracle::random_map(gen, {1, 2, 3, 3}, -1, 1);
    EXPECT_EQ(elementwise_mul(a, FeatureMap(a.shape(), 1.0)), a);
    const FeatureMap zeros = elementwise_mul(a, FeatureMap(a.shape(), 0.0));
    for (double v : zeros.data()) EXPECT_EQ(v, 0.0);

    const FeatureMap b({1, 2, 1, 1}, std::vector<double>{2.0, -0.5});
    const FeatureMap y = elementwise_mul(a, b);
    const FeatureMap y2 = elementwise_mul(b, a);
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                EXPECT_EQ(y(0, c, i, j), a(0, c, i, j) * b(0, c, 0, 0));
                EXPECT_EQ(y2(0, c, i, j), y(0, c, i, j));
            }
        }
    }
    EXPECT_THROW(elementwise_mul(a, FeatureMap({1, 3, 1, 1})), ShapeError);
    EXPECT_THROW(elementwise_mul(a, FeatureMap({1, 2, 2, 2})), ShapeError);
}

TEST(Linear, ForwardMatchesHandComputation) {
    LinearLayer layer(2, 3);
    layer.weights = {1, 2, 3, -1, 0, 0.5};
    layer.bias = {0.5, -1};
    const FeatureMap x({2, 3, 1, 1}, std::vector<double>{1, 1, 1, 2, 0, -2});
    const FeatureMap y = linear_forward(x, layer);
    EXPECT_EQ(y.shape(), (Shape{2, 2, 1, 1}));
    EXPECT_DOUBLE_EQ(y(0, 0, 0, 0), 6.5);
    EXPECT_DOUBLE_EQ(y(0, 1, 0, 0), -1.5);
    EXPECT_DOUBLE_EQ(y(1, 0, 0, 0), -3.5);
    EXPECT_DOUBLE_EQ(y(1, 1, 0, 0), -4.0);
    EXPECT_THROW(linear_forward(FeatureMap({1, 2, 1, 1}), layer), ShapeError);
}

TEST(Linear, SoftmaxCrossEntropyAndArgmax) {
    const FeatureMap logits({2, 3, 1, 1}, std::vector<double>{0, 0, 0, 1000, 0, -1000});
    const std::vector<int> labels{1, 0};
    // Row 0 is uniform (loss log 3); row 1 puts all mass on the label (loss ~0).
    EXPECT_NEAR(softmax_cross_entropy(logits, labels), std::log(3.0) / 2.0, 1e-12);
    EXPECT_EQ(argmax_rows(logits), (std::vector<int>{0, 0}));
    const auto p = softmax_rows(logits);
    EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-15);
    EXPECT_THROW(softmax_cross_entropy(logits, std::vector<int>{0, 3}), ShapeError);
    EXPECT_THROW(softmax_cross_entropy(logits, std::vector<int>{0}), ShapeError);
}
