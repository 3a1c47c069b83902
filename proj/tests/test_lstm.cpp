#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vsense/lstm.hpp"

using namespace vsense;

TEST(LstmLayer, ZeroParamsGiveZeroHiddens) {
    Tensor<float> wx({4, 1}), wh({4, 1}), b({4}), h0({1}), c0({1});
    Tensor<float> x({6, 1}, {1.f, -2.f, 3.f, 0.5f, -0.25f, 4.f});
    auto [hseq, hT, cT] = lstm_layer(x, wx, wh, b, h0, c0);
    for (auto v : hseq.data) EXPECT_FLOAT_EQ(v, 0.0f);
    EXPECT_FLOAT_EQ(hT.data[0], 0.0f);
    // cell ticks stay at zero too: c = sigma(0)*0 + sigma(0)*tanh(0)
    EXPECT_FLOAT_EQ(cT.data[0], 0.0f);
}

// Scalar two-step recurrence checked against hand-evaluated cell equations
// (gate order input, forget, cell candidate, output).
TEST(LstmLayer, MatchesHandComputedScalarSteps) {
    Tensor<double> wx({4, 1}, {0.5, -0.3, 0.8, 0.2});
    Tensor<double> wh({4, 1}, {0.1, 0.4, -0.2, 0.3});
    Tensor<double> b({4}, {0.01, -0.02, 0.03, 0.04});
    Tensor<double> h0({1}, {0.5}), c0({1}, {-0.3});
    Tensor<double> x({2, 1}, {1.0, 1.0});
    auto [hseq, hT, cT] = lstm_layer(x, wx, wh, b, h0, c0);
    EXPECT_NEAR(hseq.at(0, 0), 0.14914218629156842, 1e-15);
    EXPECT_NEAR(hseq.at(1, 0), 0.2763578691653943, 1e-15);
    EXPECT_NEAR(hT.data[0], 0.2763578691653943, 1e-15);
    EXPECT_NEAR(cT.data[0], 0.5285036148901762, 1e-15);
}

TEST(LstmLayer, RecomputationIsBitwiseStable) {
    Rng rng(67);
    auto wx = refimpl::fill_random<float>({16, 3}, rng);
    auto wh = refimpl::fill_random<float>({16, 4}, rng);
    auto b = refimpl::fill_random<float>({16}, rng);
    Tensor<float> h0({4}), c0({4});
    auto x = refimpl::fill_random<float>({7, 3}, rng);
    auto [h1, hT1, cT1] = lstm_layer(x, wx, wh, b, h0, c0);
    auto [h2, hT2, cT2] = lstm_layer(x, wx, wh, b, h0, c0);
    EXPECT_EQ(h1.data, h2.data);
    EXPECT_EQ(hT1.data, hT2.data);
    EXPECT_EQ(cT1.data, cT2.data);
}

TEST(LstmLayer, ValidatesShapes) {
    Tensor<float> wx({6, 2});  // 6 not divisible by 4
    Tensor<float> wh({6, 1}), b({6}), h0({1}), c0({1});
    Tensor<float> x({3, 2});
    EXPECT_THROW(lstm_layer(x, wx, wh, b, h0, c0), dimension_error);
    Tensor<float> wx2({8, 3});  // feature mismatch with x
    Tensor<float> wh2({8, 2}), b2({8}), h02({2}), c02({2});
    EXPECT_THROW(lstm_layer(x, wx2, wh2, b2, h02, c02), dimension_error);
}

// The batched lockstep implementation and the per-sequence functional form
// are the same recurrence.
TEST(Lstm, BatchedMatchesFunctionalForm) {
    Rng rng(71);
    const int B = 3, steps = 5, D = 4, H = 6;
    Lstm<float> layer(D, H);
    layer.init(rng);
    Tensor<float> xb({B, steps, D});
    for (auto& v : xb.data) v = static_cast<float>(rng.uniform(-1, 1));
    auto hb = layer.forward(xb, false);
    ASSERT_EQ(hb.shape, (std::vector<int>{B, steps, H}));

    Tensor<float> h0({H}), c0({H});
    for (int n = 0; n < B; ++n) {
        Tensor<float> xi({steps, D});
        std::copy_n(xb.data.begin() + n * steps * D, steps * D, xi.data.begin());
        auto [hseq, hT, cT] = lstm_layer(xi, layer.wx, layer.wh, layer.b, h0, c0);
        for (int t = 0; t < steps; ++t)
            for (int j = 0; j < H; ++j) EXPECT_NEAR(hseq.at(t, j), hb.at(n, t, j), 1e-6);
    }
}

TEST(Lstm, RejectsEmptyAndMismatchedInput) {
    Lstm<float> layer(3, 4);
    Tensor<float> bad({2, 5, 7});  // feature axis mismatch
    EXPECT_THROW(layer.forward(bad, false), dimension_error);
    Tensor<float> empty({2, 0, 3});
    EXPECT_THROW(layer.forward(empty, false), parameter_error);
    Tensor<float> wx({16, 3}), wh({16, 4}), b({16}), h0({4}), c0({4});
    Tensor<float> noseq({0, 3});
    EXPECT_THROW(lstm_layer(noseq, wx, wh, b, h0, c0), parameter_error);
}
