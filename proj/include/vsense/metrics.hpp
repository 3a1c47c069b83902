#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vsense/datagen.hpp"
#include "vsense/errors.hpp"
#include "vsense/tensor.hpp"

namespace vsense {

/// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5), K1=0.01,
/// K2=0.03, dynamic range 1. Windows are applied in valid mode (no padding)
/// and the Gaussian is separable, so local moments come from two 1-d passes.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 2, "ssim image");
    if (!a.same_shape(b)) {
        throw dimension_error("ssim: shape " + a.shape_str() + " vs " + b.shape_str());
    }
    constexpr int win = 11, half = win / 2;
    constexpr double sigma = 1.5, K1 = 0.01, K2 = 0.03, L = 1.0;
    constexpr double C1 = (K1 * L) * (K1 * L), C2 = (K2 * L) * (K2 * L);
    const int H = a.dim(0), W = a.dim(1);
    if (H < win || W < win) {
        throw dimension_error("ssim: image " + a.shape_str() + " smaller than the 11x11 window");
    }

    double g[win];
    double gsum = 0.0;
    for (int i = 0; i < win; ++i) {
        g[i] = std::exp(-0.5 * (i - half) * (i - half) / (sigma * sigma));
        gsum += g[i];
    }
    for (int i = 0; i < win; ++i) g[i] /= gsum;

    const int Wv = W - win + 1, Hv = H - win + 1;
    // Five weighted-moment planes: a, b, a^2, b^2, ab.
    std::vector<double> rows(static_cast<size_t>(5) * H * Wv);
    auto row_plane = [&](int p) { return rows.data() + static_cast<size_t>(p) * H * Wv; };
    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < Wv; ++j) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int k = 0; k < win; ++k) {
                const double va = static_cast<double>(a.at(i, j + k));
                const double vb = static_cast<double>(b.at(i, j + k));
                sa += g[k] * va;
                sb += g[k] * vb;
                saa += g[k] * va * va;
                sbb += g[k] * vb * vb;
                sab += g[k] * va * vb;
            }
            const size_t idx = static_cast<size_t>(i) * Wv + j;
            row_plane(0)[idx] = sa;
            row_plane(1)[idx] = sb;
            row_plane(2)[idx] = saa;
            row_plane(3)[idx] = sbb;
            row_plane(4)[idx] = sab;
        }
    }

    double acc = 0.0;
    for (int i = 0; i < Hv; ++i) {
        for (int j = 0; j < Wv; ++j) {
            double m[5] = {0, 0, 0, 0, 0};
            for (int k = 0; k < win; ++k) {
                const size_t idx = static_cast<size_t>(i + k) * Wv + j;
                for (int p = 0; p < 5; ++p) m[p] += g[k] * row_plane(p)[idx];
            }
            const double mu_a = m[0], mu_b = m[1];
            const double var_a = m[2] - mu_a * mu_a;
            const double var_b = m[3] - mu_b * mu_b;
            const double cov = m[4] - mu_a * mu_b;
            acc += ((2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2)) /
                   ((mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2));
        }
    }
    return acc / (static_cast<double>(Hv) * Wv);
}

// --------------------------------------------------------------------------
// Binary classification metrics. Positive class = unstable.
// --------------------------------------------------------------------------

struct ConfusionCounts {
    int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    int64_t total() const { return tp + fp + tn + fn; }
};

inline ConfusionCounts count_confusion(const std::vector<Label>& predicted,
                                       const std::vector<Label>& actual) {
    if (predicted.size() != actual.size()) {
        throw dimension_error("count_confusion: " + std::to_string(predicted.size()) +
                              " predictions vs " + std::to_string(actual.size()) + " labels");
    }
    ConfusionCounts c;
    for (size_t i = 0; i < predicted.size(); ++i) {
        const bool pred_pos = predicted[i] == Label::unstable;
        const bool is_pos = actual[i] == Label::unstable;
        if (pred_pos && is_pos) ++c.tp;
        else if (pred_pos && !is_pos) ++c.fp;
        else if (!pred_pos && !is_pos) ++c.tn;
        else ++c.fn;
    }
    return c;
}

/// A metric whose denominator is zero is reported as an explicit undefined
/// marker (empty optional), never silently coerced to 0.
struct ClassificationMetrics {
    std::optional<double> accuracy, f1, fnr;
};

inline ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
    if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0) {
        throw parameter_error("classification_metrics: negative count");
    }
    ClassificationMetrics m;
    const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
    if (c.total() > 0) m.accuracy = (tp + tn) / static_cast<double>(c.total());
    std::optional<double> precision, recall;
    if (c.tp + c.fp > 0) precision = tp / (tp + fp);
    if (c.tp + c.fn > 0) recall = tp / (tp + fn);
    if (precision && recall && *precision + *recall > 0.0) {
        m.f1 = 2.0 * *precision * *recall / (*precision + *recall);
    }
    if (c.fn + c.tp > 0) m.fnr = fn / (fn + tp);
    return m;
}

inline std::string format_metric(const std::optional<double>& v, int digits = 4) {
    if (!v) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, *v);
    return buf;
}

// --------------------------------------------------------------------------
// Multi-seed aggregation: mean and sample standard deviation.
// --------------------------------------------------------------------------

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    if (xs.size() < 2) {
        throw aggregation_error("need at least 2 runs to aggregate, got " +
                                std::to_string(xs.size()));
    }
    // Identical runs (e.g. one seed duplicated) must aggregate to exactly
    // (value, 0), not to the value plus summation roundoff.
    if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs[0]; })) {
        return {xs[0], 0.0};
    }
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    MeanStd r;
    r.mean = mean;
    r.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    return r;
}

/// Aggregation across seeds of a possibly-undefined metric: the aggregate is
/// undefined as soon as any contributing run's value is.
inline std::optional<MeanStd> mean_std(const std::vector<std::optional<double>>& xs) {
    std::vector<double> defined;
    defined.reserve(xs.size());
    for (const auto& x : xs) {
        if (!x) return std::nullopt;
        defined.push_back(*x);
    }
    return mean_std(defined);
}

}  // namespace vsense
