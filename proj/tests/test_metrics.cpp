#include "vsense/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "vsense/datagen.hpp"

using namespace vsense;

namespace {

// Direct 2-d reference with explicitly centered moments, sharing no algebra
// with the separable production kernel.
double ssim_direct(const Tensor<double>& a, const Tensor<double>& b) {
    const int win = 11, half = 5;
    const double sigma = 1.5, C1 = 1e-4, C2 = 9e-4;
    const int H = a.dim(0), W = a.dim(1);
    double w[11][11], wsum = 0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            w[i][j] = std::exp(-((i - half) * (i - half) + (j - half) * (j - half)) /
                               (2.0 * sigma * sigma));
            wsum += w[i][j];
        }
    for (auto& row : w)
        for (auto& v : row) v /= wsum;

    double acc = 0;
    int cells = 0;
    for (int i = 0; i + win <= H; ++i) {
        for (int j = 0; j + win <= W; ++j) {
            double mu_a = 0, mu_b = 0;
            for (int di = 0; di < win; ++di)
                for (int dj = 0; dj < win; ++dj) {
                    mu_a += w[di][dj] * a.at(i + di, j + dj);
                    mu_b += w[di][dj] * b.at(i + di, j + dj);
                }
            double va = 0, vb = 0, cov = 0;
            for (int di = 0; di < win; ++di)
                for (int dj = 0; dj < win; ++dj) {
                    const double da = a.at(i + di, j + dj) - mu_a;
                    const double db = b.at(i + di, j + dj) - mu_b;
                    va += w[di][dj] * da * da;
                    vb += w[di][dj] * db * db;
                    cov += w[di][dj] * da * db;
                }
            acc += ((2 * mu_a * mu_b + C1) * (2 * cov + C2)) /
                   ((mu_a * mu_a + mu_b * mu_b + C1) * (va + vb + C2));
            ++cells;
        }
    }
    return acc / cells;
}

}  // namespace

TEST(Ssim, IdentityAndSymmetry) {
    Rng rng(101);
    auto x = refimpl::fill_random<double>({64, 64}, rng, 0.0, 1.0);
    EXPECT_NEAR(ssim(x, x), 1.0, 1e-9);

    auto y = refimpl::fill_random<double>({64, 64}, rng, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(ssim(x, y), ssim(y, x));
}

TEST(Ssim, StaysWithinMinusOneToOne) {
    Rng rng(102);
    for (int trial = 0; trial < 10; ++trial) {
        auto x = refimpl::fill_random<double>({32, 32}, rng, 0.0, 1.0);
        auto y = refimpl::fill_random<double>({32, 32}, rng, 0.0, 1.0);
        const double s = ssim(x, y);
        EXPECT_GE(s, -1.0);
        EXPECT_LE(s, 1.0);
    }
    // Inverted image: strongly negative structure, still in range.
    auto x = refimpl::fill_random<double>({32, 32}, rng, 0.0, 1.0);
    Tensor<double> inv = x;
    for (auto& v : inv.data) v = 1.0 - v;
    const double s = ssim(x, inv);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
}

TEST(Ssim, MatchesDirectWindowedReference) {
    Rng rng(103);
    for (int trial = 0; trial < 3; ++trial) {
        auto x = refimpl::fill_random<double>({24, 24}, rng, 0.0, 1.0);
        auto y = refimpl::fill_random<double>({24, 24}, rng, 0.0, 1.0);
        EXPECT_NEAR(ssim(x, y), ssim_direct(x, y), 1e-10);
    }
}

TEST(Ssim, DecreasesMonotonicallyWithNoiseLevel) {
    Rng rng(104);
    const auto conds = default_conditions();
    double mean_ssim[3] = {0, 0, 0};
    const double sigmas[3] = {0.01, 0.05, 0.1};
    const int frames = 50;
    for (int f = 0; f < frames; ++f) {
        Rng frame_rng = Rng::derive(900, static_cast<uint64_t>(f));
        auto frame = render_frame(0.0, 0.0, conds[0], frame_rng);
        Tensor<double> base({64, 64});
        for (size_t i = 0; i < base.data.size(); ++i) base.data[i] = frame.data[i];
        for (int level = 0; level < 3; ++level) {
            Tensor<double> noisy = base;
            for (auto& v : noisy.data) {
                v = std::clamp(v + rng.normal(0.0, sigmas[level]), 0.0, 1.0);
            }
            mean_ssim[level] += ssim(base, noisy) / frames;
        }
    }
    EXPECT_GT(mean_ssim[0], mean_ssim[1]);
    EXPECT_GT(mean_ssim[1], mean_ssim[2]);
}

TEST(Ssim, RejectsMismatchedOrTinyImages) {
    Tensor<double> a({16, 16}), b({16, 17});
    EXPECT_THROW(ssim(a, b), dimension_error);
    Tensor<double> tiny({8, 8});
    EXPECT_THROW(ssim(tiny, tiny), dimension_error);
    Tensor<double> flat({64});
    EXPECT_THROW(ssim(flat, flat), dimension_error);
}

TEST(ClassificationMetrics, HandComputedConfusionCase) {
    const ConfusionCounts c{9, 1, 8, 2};
    const auto m = classification_metrics(c);
    ASSERT_TRUE(m.accuracy && m.f1 && m.fnr);
    EXPECT_DOUBLE_EQ(*m.accuracy, 0.85);
    const double p = 0.9, r = 9.0 / 11.0;
    EXPECT_DOUBLE_EQ(*m.f1, 2.0 * p * r / (p + r));
    EXPECT_NEAR(*m.f1, 0.8571, 5e-5);
    EXPECT_DOUBLE_EQ(*m.fnr, 2.0 / 11.0);
    EXPECT_NEAR(*m.fnr, 0.1818, 5e-5);
}

TEST(ClassificationMetrics, PerfectPredictionsAndDegenerateDenominators) {
    const auto perfect = classification_metrics({10, 0, 10, 0});
    EXPECT_DOUBLE_EQ(*perfect.accuracy, 1.0);
    EXPECT_DOUBLE_EQ(*perfect.f1, 1.0);
    EXPECT_DOUBLE_EQ(*perfect.fnr, 0.0);

    // All-stable predictor on balanced data: accuracy 0.5, FNR 1, and the
    // F1 numerator/denominator vanish, so F1 is an explicit undefined.
    const auto all_stable = classification_metrics({0, 0, 10, 10});
    EXPECT_DOUBLE_EQ(*all_stable.accuracy, 0.5);
    EXPECT_DOUBLE_EQ(*all_stable.fnr, 1.0);
    EXPECT_FALSE(all_stable.f1.has_value());

    // No positive samples and none predicted: FNR undefined, accuracy fine.
    const auto no_pos = classification_metrics({0, 0, 5, 0});
    EXPECT_DOUBLE_EQ(*no_pos.accuracy, 1.0);
    EXPECT_FALSE(no_pos.fnr.has_value());
    EXPECT_FALSE(no_pos.f1.has_value());

    const auto empty = classification_metrics({0, 0, 0, 0});
    EXPECT_FALSE(empty.accuracy.has_value());

    EXPECT_THROW(classification_metrics({-1, 0, 0, 0}), parameter_error);

    EXPECT_EQ(format_metric(no_pos.fnr), "undefined");
    EXPECT_EQ(format_metric(no_pos.accuracy), "1.0000");
}

TEST(ClassificationMetrics, AgreesWithBruteForceOnRandomVectors) {
    Rng rng(105);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + static_cast<int>(rng.next_u64() % 50);
        std::vector<Label> pred(static_cast<size_t>(n)), actual(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            pred[static_cast<size_t>(i)] =
                rng.next_double() < 0.5 ? Label::stable : Label::unstable;
            actual[static_cast<size_t>(i)] =
                rng.next_double() < 0.5 ? Label::stable : Label::unstable;
        }
        int64_t tp = 0, fp = 0, tn = 0, fn = 0;
        for (int i = 0; i < n; ++i) {
            const bool pp = pred[static_cast<size_t>(i)] == Label::unstable;
            const bool ap = actual[static_cast<size_t>(i)] == Label::unstable;
            tp += pp && ap;
            fp += pp && !ap;
            tn += !pp && !ap;
            fn += !pp && ap;
        }
        const auto c = count_confusion(pred, actual);
        ASSERT_EQ(c.tp, tp);
        ASSERT_EQ(c.fp, fp);
        ASSERT_EQ(c.tn, tn);
        ASSERT_EQ(c.fn, fn);
        ASSERT_EQ(c.total(), n);

        const auto m = classification_metrics(c);
        ASSERT_EQ(*m.accuracy, static_cast<double>(tp + tn) / n);
        if (tp + fn > 0) {
            ASSERT_EQ(*m.fnr, static_cast<double>(fn) / static_cast<double>(fn + tp));
            // FNR and recall partition the positives.
            EXPECT_NEAR(*m.fnr + static_cast<double>(tp) / static_cast<double>(tp + fn), 1.0,
                        1e-12);
        } else {
            ASSERT_FALSE(m.fnr.has_value());
        }
    }
}

TEST(CountConfusion, RejectsLengthMismatch) {
    std::vector<Label> a(3, Label::stable), b(4, Label::stable);
    EXPECT_THROW(count_confusion(a, b), dimension_error);
}

TEST(Aggregation, MeanAndSampleStdOverSeeds) {
    const auto r = mean_std(std::vector<double>{0.98, 1.00});
    EXPECT_NEAR(r.mean, 0.99, 1e-12);
    EXPECT_NEAR(r.stddev, 0.01414, 5e-5);

    const auto dup = mean_std(std::vector<double>{0.7, 0.7, 0.7});
    EXPECT_DOUBLE_EQ(dup.mean, 0.7);
    EXPECT_DOUBLE_EQ(dup.stddev, 0.0);

    EXPECT_THROW(mean_std(std::vector<double>{0.5}), aggregation_error);
    EXPECT_THROW(mean_std(std::vector<double>{}), aggregation_error);
}

TEST(Aggregation, OrderIndependentToShuffling) {
    Rng rng(106);
    std::vector<double> xs(9);
    for (auto& v : xs) v = rng.uniform(0.0, 1.0);
    const auto base = mean_std(xs);
    for (int trial = 0; trial < 5; ++trial) {
        // Fisher-Yates with the shared rng
        for (size_t i = xs.size(); i > 1; --i) {
            std::swap(xs[i - 1], xs[static_cast<size_t>(rng.next_u64() % i)]);
        }
        const auto shuffled = mean_std(xs);
        EXPECT_NEAR(shuffled.mean, base.mean, 1e-12);
        EXPECT_NEAR(shuffled.stddev, base.stddev, 1e-12);
    }
}

TEST(Aggregation, UndefinedValuesPropagate) {
    std::vector<std::optional<double>> with_gap = {0.5, std::nullopt, 0.7};
    EXPECT_FALSE(mean_std(with_gap).has_value());
    std::vector<std::optional<double>> full = {0.5, 0.7};
    const auto r = mean_std(full);
    ASSERT_TRUE(r.has_value());
    EXPECT_NEAR(r->mean, 0.6, 1e-12);
}
