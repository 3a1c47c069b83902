#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "vsense/layers.hpp"

using namespace vsense;

namespace {

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    EXPECT_TRUE(a.same_shape(b)) << a.shape_str() << " vs " << b.shape_str();
    double worst = 0;
    for (size_t i = 0; i < a.data.size(); ++i)
        worst = std::max(worst, std::abs(double(a.data[i]) - double(b.data[i])));
    return worst;
}

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
    double acc = 0;
    for (size_t i = 0; i < a.data.size(); ++i) acc += double(a.data[i]) * double(b.data[i]);
    return acc;
}

}  // namespace

TEST(Conv2d, AllOnesKernelSumsItsWindow) {
    Tensor<float> x({1, 4, 4});
    for (auto& v : x.data) v = 1.0f;
    Tensor<float> w({1, 1, 3, 3});
    for (auto& v : w.data) v = 1.0f;
    Tensor<float> b({1});
    auto y = conv2d(x, w, b, 1, 1);
    ASSERT_EQ(y.shape, (std::vector<int>{1, 4, 4}));
    EXPECT_FLOAT_EQ(y.at(0, 1, 1), 9.0f);
    EXPECT_FLOAT_EQ(y.at(0, 2, 2), 9.0f);
    EXPECT_FLOAT_EQ(y.at(0, 0, 0), 4.0f);  // corner sees a 2x2 window
}

TEST(Conv2d, IdentityKernelPreservesInput) {
    Rng rng(3);
    auto x = refimpl::fill_random<float>({2, 5, 5}, rng);
    Tensor<float> w({2, 2, 3, 3});
    w.at(0, 0, 1, 1) = 1.0f;
    w.at(1, 1, 1, 1) = 1.0f;
    Tensor<float> b({2});
    auto y = conv2d(x, w, b, 1, 1);
    EXPECT_EQ(max_abs_diff(y, x), 0.0);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
    Rng rng(17);
    auto x = refimpl::fill_random<float>({2, 8, 8}, rng);
    auto w = refimpl::fill_random<float>({4, 2, 3, 3}, rng);
    auto b = refimpl::fill_random<float>({4}, rng);
    auto y = conv2d(x, w, b, 1, 1);
    auto ref = refimpl::conv2d(x, w, b, 1, 1);
    EXPECT_LT(max_abs_diff(y, ref), 1e-6);

    // Strided case: (9 + 2 - 3)/2 + 1 = 5.
    auto xs = refimpl::fill_random<float>({3, 9, 9}, rng);
    auto ws = refimpl::fill_random<float>({2, 3, 3, 3}, rng);
    auto bs = refimpl::fill_random<float>({2}, rng);
    auto ys = conv2d(xs, ws, bs, 2, 1);
    ASSERT_EQ(ys.shape, (std::vector<int>{2, 5, 5}));
    EXPECT_LT(max_abs_diff(ys, refimpl::conv2d(xs, ws, bs, 2, 1)), 1e-6);
}

TEST(Conv2d, RejectsBadGeometry) {
    Tensor<float> x({2, 4, 4});
    Tensor<float> w({1, 3, 3, 3});  // channel mismatch
    Tensor<float> b({1});
    EXPECT_THROW(conv2d(x, w, b, 1, 1), dimension_error);
    Tensor<float> weven({1, 2, 2, 2});
    EXPECT_THROW(conv2d(x, weven, b, 1, 0), dimension_error);
    Tensor<float> wok({1, 2, 3, 3});
    EXPECT_THROW(conv2d(x, wok, b, 3, 0), dimension_error);  // (4-3)/3 not integral
    x.data[0] = std::numeric_limits<float>::quiet_NaN();
    EXPECT_THROW(conv2d(x, wok, b, 1, 1), parameter_error);
}

TEST(ConvTranspose2d, SingleInputPixelPaintsTheKernel) {
    Tensor<float> x({1, 1, 1}, {2.5f});
    Rng rng(5);
    auto w = refimpl::fill_random<float>({1, 1, 3, 3}, rng);
    Tensor<float> b({1}, {0.5f});
    auto y = conv_transpose2d(x, w, b, 1, 0);
    ASSERT_EQ(y.shape, (std::vector<int>{1, 3, 3}));
    for (int i = 0; i < 9; ++i) EXPECT_FLOAT_EQ(y.data[(size_t)i], 2.5f * w.data[(size_t)i] + 0.5f);
}

TEST(ConvTranspose2d, ZeroInputBroadcastsBias) {
    Tensor<float> x({3, 4, 4});
    Tensor<float> w({3, 2, 3, 3});
    Tensor<float> b({2}, {1.25f, -0.75f});
    auto y = conv_transpose2d(x, w, b, 1, 1);
    ASSERT_EQ(y.shape, (std::vector<int>{2, 4, 4}));
    for (int h = 0; h < 4; ++h)
        for (int ww = 0; ww < 4; ++ww) {
            EXPECT_FLOAT_EQ(y.at(0, h, ww), 1.25f);
            EXPECT_FLOAT_EQ(y.at(1, h, ww), -0.75f);
        }
}

// <conv(x), u> == <x, convT(u)> for zero bias: the transpose layer is the
// exact adjoint of the convolution with the same kernel bank.
TEST(ConvTranspose2d, IsAdjointOfConv2d) {
    Rng rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        auto x = refimpl::fill_random<double>({2, 6, 6}, rng);
        auto w = refimpl::fill_random<double>({3, 2, 3, 3}, rng);
        Tensor<double> b0c({3}), b0t({2});
        auto y = conv2d(x, w, b0c, 1, 1);
        auto u = refimpl::fill_random<double>(y.shape, rng);
        auto xt = conv_transpose2d(u, w, b0t, 1, 1);
        EXPECT_NEAR(dot(y, u), dot(x, xt), 1e-10);
    }
}

TEST(MaxPool2d, TakesWindowMaxAndRecordsArgmax) {
    Tensor<float> x({1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
    auto [y, am] = maxpool2d(x, 2);
    ASSERT_EQ(y.shape, (std::vector<int>{1, 1, 1}));
    EXPECT_FLOAT_EQ(y.data[0], 4.0f);
    EXPECT_EQ(am[0], 3);
}

TEST(MaxPool2d, TieBreaksToFirstRowMajorIndex) {
    Tensor<float> x({1, 2, 2}, {7.f, 7.f, 7.f, 7.f});
    auto [y, am] = maxpool2d(x, 2);
    EXPECT_FLOAT_EQ(y.data[0], 7.0f);
    EXPECT_EQ(am[0], 0);
}

TEST(MaxPool2d, MatchesBruteForceOracle) {
    Rng rng(29);
    auto x = refimpl::fill_random<float>({4, 8, 8}, rng);
    auto [y, am] = maxpool2d(x, 2);
    EXPECT_EQ(max_abs_diff(y, refimpl::maxpool2d(x, 2)), 0.0);
    Tensor<float> odd({1, 5, 4});
    EXPECT_THROW(maxpool2d(odd, 2), dimension_error);
}

TEST(Upsample2d, ReplicatesPixels) {
    Tensor<float> x({1, 1, 1}, {3.5f});
    auto y = upsample2d_nearest(x, 2);
    ASSERT_EQ(y.shape, (std::vector<int>{1, 2, 2}));
    for (auto v : y.data) EXPECT_FLOAT_EQ(v, 3.5f);

    Rng rng(31);
    auto r = refimpl::fill_random<float>({2, 3, 3}, rng);
    EXPECT_EQ(max_abs_diff(upsample2d_nearest(r, 1), r), 0.0);
    EXPECT_THROW(upsample2d_nearest(r, 0), parameter_error);
}

TEST(Upsample2d, AveragePoolRoundTripsToInput) {
    Rng rng(37);
    auto x = refimpl::fill_random<double>({2, 4, 4}, rng);
    auto big = upsample2d_nearest(x, 3);
    Tensor<double> back({2, 4, 4});
    for (int c = 0; c < 2; ++c)
        for (int h = 0; h < 4; ++h)
            for (int w = 0; w < 4; ++w) {
                double acc = 0;
                for (int dh = 0; dh < 3; ++dh)
                    for (int dw = 0; dw < 3; ++dw) acc += big.at(c, h * 3 + dh, w * 3 + dw);
                back.at(c, h, w) = acc / 9.0;
            }
    EXPECT_LT(max_abs_diff(back, x), 1e-12);
}

TEST(Dense, IdentityAndConstantCases) {
    Tensor<float> x({3}, {1.f, -2.f, 3.f});
    Tensor<float> wI({3, 3});
    for (int i = 0; i < 3; ++i) wI.at(i, i) = 1.0f;
    Tensor<float> b0({3});
    EXPECT_EQ(max_abs_diff(dense(x, wI, b0), x), 0.0);

    Tensor<float> w0({2, 3});
    Tensor<float> bc({2}, {4.f, -1.f});
    auto y = dense(x, w0, bc);
    EXPECT_FLOAT_EQ(y.data[0], 4.0f);
    EXPECT_FLOAT_EQ(y.data[1], -1.0f);
}

TEST(Dense, MatchesDotProductOracle) {
    Rng rng(41);
    auto x = refimpl::fill_random<float>({17}, rng);
    auto w = refimpl::fill_random<float>({9, 17}, rng);
    auto b = refimpl::fill_random<float>({9}, rng);
    EXPECT_LT(max_abs_diff(dense(x, w, b), refimpl::dense(x, w, b)), 1e-6);
    Tensor<float> wrong({9, 16});
    EXPECT_THROW(dense(x, wrong, b), dimension_error);
}

TEST(Activations, PointValues) {
    Tensor<float> x({4}, {-1.f, 0.f, 2.f, -3.f});
    auto r = relu(x);
    EXPECT_FLOAT_EQ(r.data[0], 0.f);
    EXPECT_FLOAT_EQ(r.data[2], 2.f);
    auto s = sigmoid(Tensor<float>({1}, {0.f}));
    EXPECT_FLOAT_EQ(s.data[0], 0.5f);
    auto t = tanh_act(Tensor<float>({1}, {0.f}));
    EXPECT_FLOAT_EQ(t.data[0], 0.f);
}

TEST(Dropout, IdentityCases) {
    Rng rng(43);
    auto x = refimpl::fill_random<float>({50}, rng);
    Rng d1(1);
    EXPECT_EQ(max_abs_diff(dropout(x, 0.0, Mode::train, d1), x), 0.0);
    EXPECT_EQ(max_abs_diff(dropout(x, 0.7, Mode::eval, d1), x), 0.0);
    EXPECT_THROW(dropout(x, 1.0, Mode::train, d1), parameter_error);
    EXPECT_THROW(dropout(x, -0.1, Mode::train, d1), parameter_error);
}

TEST(Dropout, SurvivalRateAndScaleAreUnbiased) {
    Tensor<float> x({100, 200});
    for (auto& v : x.data) v = 1.0f;
    Rng rng(47);
    auto y = dropout(x, 0.5, Mode::train, rng);
    int64_t survivors = 0;
    double sum = 0;
    for (auto v : y.data) {
        if (v != 0.0f) {
            ++survivors;
            EXPECT_FLOAT_EQ(v, 2.0f);  // scaled by 1/(1-rate)
        }
        sum += v;
    }
    const double frac = double(survivors) / double(x.numel());
    EXPECT_NEAR(frac, 0.5, 0.05);
    EXPECT_NEAR(sum / double(x.numel()), 1.0, 0.05);
}

TEST(Layers, ForwardPassesArePure) {
    Rng rng(53);
    auto x = refimpl::fill_random<float>({2, 6, 6}, rng);
    auto w = refimpl::fill_random<float>({3, 2, 3, 3}, rng);
    auto b = refimpl::fill_random<float>({3}, rng);
    auto y1 = conv2d(x, w, b, 1, 1);
    auto y2 = conv2d(x, w, b, 1, 1);
    EXPECT_EQ(y1.data, y2.data);

    Rng ra(99), rb(99);
    auto d1 = dropout(x, 0.3, Mode::train, ra);
    auto d2 = dropout(x, 0.3, Mode::train, rb);
    EXPECT_EQ(d1.data, d2.data);
}

// The batched layer objects and the single-sample free functions compute the
// same mapping.
TEST(Layers, BatchedObjectsAgreeWithFreeFunctions) {
    Rng rng(59);
    const int B = 3;
    Conv2d<float> conv(2, 4, 3, 1, 1);
    conv.init(rng);
    Tensor<float> xb({B, 2, 6, 6});
    for (auto& v : xb.data) v = static_cast<float>(rng.uniform(-1, 1));
    auto yb = conv.forward(xb, false);
    for (int n = 0; n < B; ++n) {
        Tensor<float> xi({2, 6, 6});
        std::copy_n(xb.data.begin() + n * xi.numel(), xi.numel(), xi.data.begin());
        auto yi = conv2d(xi, conv.w, conv.b, 1, 1);
        for (int64_t i = 0; i < yi.numel(); ++i)
            EXPECT_FLOAT_EQ(yi.data[(size_t)i], yb.data[(size_t)(n * yi.numel() + i)]);
    }

    Dense<float> fc(10, 4);
    fc.init(rng);
    Tensor<float> xd({B, 10});
    for (auto& v : xd.data) v = static_cast<float>(rng.uniform(-1, 1));
    auto yd = fc.forward(xd, false);
    for (int n = 0; n < B; ++n) {
        Tensor<float> xi({10});
        std::copy_n(xd.data.begin() + n * 10, 10, xi.data.begin());
        auto yi = dense(xi, fc.w, fc.b);
        for (int j = 0; j < 4; ++j) EXPECT_FLOAT_EQ(yi.data[(size_t)j], yd.at(n, j));
    }
}

TEST(Init, BoundsFollowFanIn) {
    Rng rng(61);
    Dense<float> fc(64, 8);
    fc.init(rng);
    const float bound = 1.0f / std::sqrt(64.0f);
    float lo = 0, hi = 0;
    for (auto v : fc.w.data) {
        EXPECT_LE(std::abs(v), bound);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    // The draw actually fills the interval, not just a sliver of it.
    EXPECT_LT(lo, -0.8f * bound);
    EXPECT_GT(hi, 0.8f * bound);
}
