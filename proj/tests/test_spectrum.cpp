#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "vsense/rng.hpp"
#include "vsense/spectrum.hpp"

using namespace vsense;

namespace {

Tensor<float> sine_series(int channels, int n, int rate, double freq, double amp) {
    Tensor<float> s({channels, n});
    for (int c = 0; c < channels; ++c)
        for (int i = 0; i < n; ++i)
            s.at(c, i) = static_cast<float>(
                amp * std::sin(2.0 * std::numbers::pi * freq * i / rate + 0.3 * c));
    return s;
}

}  // namespace

TEST(Spectrum, SineRmsIsAmplitudeOverSqrt2) {
    auto s = sine_series(1, 27000, 9000, 140.0, 707.1);
    EXPECT_NEAR(rms(&s.at(0, 0), 27000), 500.0, 0.5);
}

TEST(Spectrum, MagnitudePeakOfPureSine) {
    // amp A over n samples concentrates A*n/2 into the signal bin
    const int n = 9000;
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i)
        x[(size_t)i] = 2.0 * std::sin(2.0 * std::numbers::pi * 150.0 * i / 9000.0);
    auto mag = magnitude_spectrum(x.data(), n);
    EXPECT_NEAR(mag[150], 2.0 * n / 2.0, 1e-6 * n);
}

TEST(Spectrum, DominantFrequencyFindsTheTone) {
    auto s = sine_series(4, 27000, 9000, 140.0, 800.0);
    auto p = dominant_frequency(s, 9000);
    EXPECT_NEAR(p.freq, 140.0, 9000.0 / 27000.0);  // one bin
    EXPECT_GT(p.ratio, 100.0);
}

TEST(Spectrum, BroadbandNoiseHasNoSharpPeak) {
    Rng rng(5);
    Tensor<float> s({4, 27000});
    for (auto& v : s.data) v = static_cast<float>(rng.normal(0.0, 50.0));
    auto p = dominant_frequency(s, 9000);
    EXPECT_LT(p.ratio, 10.0);
}

TEST(Spectrum, LowpassRemovesHighBandAndMean) {
    Rng rng(7);
    const int n = 27000, rate = 9000;
    std::vector<double> white(n);
    for (auto& v : white) v = rng.normal();
    auto y = lowpass_fft(white, rate, 500.0);

    double mean = 0;
    for (double v : y) mean += v / n;
    EXPECT_NEAR(mean, 0.0, 1e-12);

    auto mag = magnitude_spectrum(y.data(), n);
    const double hz_per_bin = double(rate) / n;
    double above = 0, below = 0;
    for (size_t k = 1; k < mag.size(); ++k)
        (k * hz_per_bin > 500.0 ? above : below) += mag[k];
    EXPECT_GT(below, 0.0);
    EXPECT_LT(above, 1e-9 * below);
}

TEST(Spectrum, RejectsDegenerateInput) {
    Tensor<float> one({1, 1});
    EXPECT_THROW(dominant_frequency(one, 9000), parameter_error);
    EXPECT_THROW(rms(static_cast<const float*>(nullptr), 0), parameter_error);
}
