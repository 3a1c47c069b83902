#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "vsense/errors.hpp"
#include "vsense/metrics.hpp"
#include "vsense/models.hpp"
#include "vsense/training.hpp"

namespace vsense {

// --------------------------------------------------------------------------
// Test-time pipeline: window -> ts embedding -> reconstruction -> logit.
// True frames enter metric computation only; no model forward ever sees one,
// so perturbing them cannot change a prediction.
// --------------------------------------------------------------------------

/// Artifacts are interchangeable only when they come from the same run:
/// equal config hash and equal seed. Mixing is refused, not reconciled.
inline void require_compatible_artifacts(const std::vector<std::pair<std::string, ModelFileInfo>>& parts) {
    if (parts.empty()) return;
    const ModelFileInfo& first = parts.front().second;
    for (const auto& [name, info] : parts) {
        if (info.config_hash != first.config_hash) {
            throw incompatibility_error(name + " was produced under config " +
                                        hex64(info.config_hash) + ", expected " +
                                        hex64(first.config_hash) + " from " + parts.front().first);
        }
        if (info.seed != first.seed) {
            throw incompatibility_error(name + " was trained with seed " +
                                        std::to_string(info.seed) + ", expected seed " +
                                        std::to_string(first.seed) + " from " + parts.front().first);
        }
    }
}

struct PipelineResult {
    std::vector<Label> predictions;
    std::vector<Tensor<float>> reconstructions;  // one (64,64) frame per sample
    std::vector<double> ssim_per_sample;
    std::vector<double> mse_per_sample;
};

namespace detail {

constexpr int eval_batch = 32;

inline void require_eval_split(const std::vector<Sample>& samples) {
    if (samples.empty()) throw parameter_error("evaluation split is empty");
}

inline void require_uniform_windows(const std::vector<Sample>& samples) {
    require_eval_split(samples);
    const auto& shape = samples.front().window.shape;
    for (const auto& s : samples) {
        if (s.window.shape != shape) {
            throw dimension_error("evaluation windows disagree in shape: " +
                                  s.window.shape_str() + " vs " +
                                  samples.front().window.shape_str());
        }
    }
}

inline std::vector<int> identity_order(size_t n) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    return order;
}

}  // namespace detail

inline PipelineResult run_test_pipeline(TsEncoder<float>& ts_encoder,
                                        ImageDecoder<float>& decoder,
                                        ImageClassifier<float>& classifier,
                                        const std::vector<Sample>& samples) {
    detail::require_uniform_windows(samples);
    const std::vector<int> order = detail::identity_order(samples.size());
    const int window_len = samples.front().window.dim(1);
    PipelineResult out;
    out.predictions.reserve(samples.size());
    out.reconstructions.reserve(samples.size());
    out.ssim_per_sample.reserve(samples.size());
    out.mse_per_sample.reserve(samples.size());
    for (size_t lo = 0; lo < samples.size(); lo += detail::eval_batch) {
        const size_t hi = std::min(samples.size(), lo + detail::eval_batch);
        Tensor<float> x = detail::batch_windows(samples, order, lo, hi, window_len);
        Tensor<float> emb = ts_encoder.forward(x, false);
        Tensor<float> recon = decoder.forward(emb, false);
        Tensor<float> logits = classifier.forward(recon, false);
        const int H = recon.dim(2), W = recon.dim(3);
        for (size_t n = lo; n < hi; ++n) {
            Tensor<float> frame({H, W});
            const float* src = recon.data.data() + (n - lo) * static_cast<size_t>(H) * W;
            std::copy(src, src + static_cast<size_t>(H) * W, frame.data.begin());
            out.ssim_per_sample.push_back(ssim(frame, samples[n].frame));
            out.mse_per_sample.push_back(mse_loss(frame, samples[n].frame));
            out.predictions.push_back(
                predict_label(static_cast<double>(logits.at(static_cast<int>(n - lo), 0))));
            out.reconstructions.push_back(std::move(frame));
        }
    }
    return out;
}

/// Baseline heads: classify true frames directly (no reconstruction).
inline std::vector<Label> classify_true_frames(ImageClassifier<float>& classifier,
                                               const std::vector<Sample>& samples) {
    detail::require_eval_split(samples);
    const std::vector<int> order = detail::identity_order(samples.size());
    std::vector<Label> preds;
    preds.reserve(samples.size());
    for (size_t lo = 0; lo < samples.size(); lo += detail::eval_batch) {
        const size_t hi = std::min(samples.size(), lo + detail::eval_batch);
        Tensor<float> logits = classifier.forward(detail::batch_frames(samples, order, lo, hi), false);
        for (size_t n = lo; n < hi; ++n) {
            preds.push_back(predict_label(static_cast<double>(logits.at(static_cast<int>(n - lo), 0))));
        }
    }
    return preds;
}

/// Baseline heads: classify raw windows directly (no image path at all).
inline std::vector<Label> classify_windows(TsClassifier<float>& classifier,
                                           const std::vector<Sample>& samples) {
    detail::require_uniform_windows(samples);
    const std::vector<int> order = detail::identity_order(samples.size());
    const int window_len = samples.front().window.dim(1);
    std::vector<Label> preds;
    preds.reserve(samples.size());
    for (size_t lo = 0; lo < samples.size(); lo += detail::eval_batch) {
        const size_t hi = std::min(samples.size(), lo + detail::eval_batch);
        Tensor<float> logits =
            classifier.forward(detail::batch_windows(samples, order, lo, hi, window_len), false);
        for (size_t n = lo; n < hi; ++n) {
            preds.push_back(predict_label(static_cast<double>(logits.at(static_cast<int>(n - lo), 0))));
        }
    }
    return preds;
}

// --------------------------------------------------------------------------
// Per-run evaluation records and multi-seed aggregation.
// --------------------------------------------------------------------------

/// Metrics of one (regime, seed) evaluation. Reconstruction columns are
/// absent for heads that never produce an image.
struct RunEval {
    Regime regime = Regime::AE;
    uint64_t seed = 0;
    uint64_t config_hash = 0;
    std::optional<double> ssim_mean, mse_mean;
    ClassificationMetrics classification;
};

inline std::vector<Label> true_labels(const std::vector<Sample>& samples) {
    std::vector<Label> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
}

inline RunEval eval_reconstructing_run(Regime regime, uint64_t seed, uint64_t config_hash,
                                       TsEncoder<float>& ts_encoder, ImageDecoder<float>& decoder,
                                       ImageClassifier<float>& classifier,
                                       const std::vector<Sample>& samples) {
    PipelineResult p = run_test_pipeline(ts_encoder, decoder, classifier, samples);
    RunEval r;
    r.regime = regime;
    r.seed = seed;
    r.config_hash = config_hash;
    double ssim_sum = 0, mse_sum = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
        ssim_sum += p.ssim_per_sample[i];
        mse_sum += p.mse_per_sample[i];
    }
    r.ssim_mean = ssim_sum / static_cast<double>(samples.size());
    r.mse_mean = mse_sum / static_cast<double>(samples.size());
    r.classification = classification_metrics(count_confusion(p.predictions, true_labels(samples)));
    return r;
}

inline RunEval eval_image_classifier_run(uint64_t seed, uint64_t config_hash,
                                         ImageClassifier<float>& classifier,
                                         const std::vector<Sample>& samples) {
    RunEval r;
    r.regime = Regime::IMG_CLS;
    r.seed = seed;
    r.config_hash = config_hash;
    r.classification =
        classification_metrics(count_confusion(classify_true_frames(classifier, samples),
                                               true_labels(samples)));
    return r;
}

inline RunEval eval_ts_classifier_run(uint64_t seed, uint64_t config_hash,
                                      TsClassifier<float>& classifier,
                                      const std::vector<Sample>& samples) {
    RunEval r;
    r.regime = Regime::TS_CLS;
    r.seed = seed;
    r.config_hash = config_hash;
    r.classification = classification_metrics(
        count_confusion(classify_windows(classifier, samples), true_labels(samples)));
    return r;
}

/// One table row: metrics of a regime aggregated over its seeds.
struct RegimeSummary {
    Regime regime = Regime::AE;
    int runs = 0;
    std::optional<MeanStd> ssim, mse;
    std::optional<MeanStd> accuracy, f1, fnr;
};

/// Aggregation is order-independent: runs are reduced in seed order no matter
/// how the caller collected them.
inline RegimeSummary aggregate_runs(std::vector<RunEval> runs) {
    if (runs.size() < 2) {
        throw aggregation_error("need at least 2 runs to aggregate, got " +
                                std::to_string(runs.size()));
    }
    for (const auto& r : runs) {
        if (r.regime != runs.front().regime) {
            throw aggregation_error(std::string("cannot aggregate ") + regime_name(r.regime) +
                                    " run into " + regime_name(runs.front().regime) + " summary");
        }
        if (r.config_hash != runs.front().config_hash) {
            throw aggregation_error("runs mix config " + hex64(r.config_hash) + " with " +
                                    hex64(runs.front().config_hash));
        }
    }
    std::sort(runs.begin(), runs.end(),
              [](const RunEval& a, const RunEval& b) { return a.seed < b.seed; });
    RegimeSummary s;
    s.regime = runs.front().regime;
    s.runs = static_cast<int>(runs.size());
    std::vector<std::optional<double>> ssim_v, mse_v, acc_v, f1_v, fnr_v;
    for (const auto& r : runs) {
        ssim_v.push_back(r.ssim_mean);
        mse_v.push_back(r.mse_mean);
        acc_v.push_back(r.classification.accuracy);
        f1_v.push_back(r.classification.f1);
        fnr_v.push_back(r.classification.fnr);
    }
    s.ssim = mean_std(ssim_v);
    s.mse = mean_std(mse_v);
    s.accuracy = mean_std(acc_v);
    s.f1 = mean_std(f1_v);
    s.fnr = mean_std(fnr_v);
    return s;
}

// --------------------------------------------------------------------------
// Report table: one row per evaluated model, reconstruction quality as plain
// means, classification metrics as mean +/- std, NA where a model has no
// image output.
// --------------------------------------------------------------------------

inline const std::vector<Regime>& report_row_order() {
    static const std::vector<Regime> order = {Regime::IMG_CLS, Regime::TS_CLS, Regime::XMODAL,
                                              Regime::VS1,     Regime::VS1A,   Regime::VS1B,
                                              Regime::VS2,     Regime::VS2A};
    return order;
}

namespace detail {

inline std::string cell_mean(const std::optional<MeanStd>& m, int digits) {
    if (!m) return "NA";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, m->mean);
    return buf;
}

inline std::string cell_mean_std(const std::optional<MeanStd>& m, int digits) {
    if (!m) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f +/- %.*f", digits, m->mean, digits, m->stddev);
    return buf;
}

}  // namespace detail

/// Render summaries as fixed-width text. Rows follow the canonical model
/// order; regimes absent from `rows` are simply not printed.
inline std::string render_report_table(const std::vector<RegimeSummary>& rows) {
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"Model", "SSIM", "MSE", "Accuracy", "F1", "FNR"});
    for (Regime regime : report_row_order()) {
        auto it = std::find_if(rows.begin(), rows.end(),
                               [&](const RegimeSummary& r) { return r.regime == regime; });
        if (it == rows.end()) continue;
        grid.push_back({regime_name(regime), detail::cell_mean(it->ssim, 4),
                        detail::cell_mean(it->mse, 5), detail::cell_mean_std(it->accuracy, 4),
                        detail::cell_mean_std(it->f1, 4), detail::cell_mean_std(it->fnr, 4)});
    }
    std::vector<size_t> width(grid.front().size(), 0);
    for (const auto& row : grid) {
        for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::string out;
    for (size_t r = 0; r < grid.size(); ++r) {
        for (size_t c = 0; c < grid[r].size(); ++c) {
            out += grid[r][c];
            if (c + 1 < grid[r].size()) {
                out.append(width[c] - grid[r][c].size() + 2, ' ');
            }
        }
        out += '\n';
        if (r == 0) {
            size_t total = 0;
            for (size_t c = 0; c < width.size(); ++c) total += width[c] + (c + 1 < width.size() ? 2 : 0);
            out.append(total, '-');
            out += '\n';
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// Reconstruction dump inspection: reader for the 8-bit binary PGM files the
// generator and CLI emit.
// --------------------------------------------------------------------------

inline Tensor<float> read_pgm(const std::string& path) {
    ByteReader r = ByteReader::from_file(path);
    // P5, width, height, maxval tokens, one whitespace byte, then pixel data.
    // '#' starts a header comment running to end of line.
    std::vector<std::string> toks;
    std::string tok;
    size_t pos = 0;
    while (pos < r.buf.size() && toks.size() < 4) {
        const char ch = static_cast<char>(r.buf[pos++]);
        if (ch == '#' && tok.empty()) {
            while (pos < r.buf.size() && r.buf[pos] != '\n') ++pos;
        } else if (ch == ' ' || ch == '\n' || ch == '\t' || ch == '\r') {
            if (!tok.empty()) {
                toks.push_back(tok);
                tok.clear();
            }
        } else {
            tok += ch;
        }
    }
    if (toks.size() != 4 || toks[0] != "P5" || toks[3] != "255") {
        throw format_error(path + " is not an 8-bit binary PGM");
    }
    const int w = std::stoi(toks[1]), h = std::stoi(toks[2]);
    if (r.buf.size() - pos != static_cast<size_t>(w) * h) {
        throw format_error(path + " pixel payload does not match " + std::to_string(w) + "x" +
                           std::to_string(h));
    }
    Tensor<float> frame({h, w});
    for (size_t i = 0; i < frame.data.size(); ++i) {
        frame.data[i] = static_cast<float>(r.buf[pos + i]) / 255.0f;
    }
    return frame;
}

/// Largest per-pixel standard deviation across a set of equally shaped
/// frames; low values mean the set is temporally near-constant.
inline double max_per_pixel_std(const std::vector<Tensor<float>>& frames) {
    if (frames.size() < 2) {
        throw parameter_error("per-pixel spread needs at least 2 frames, got " +
                              std::to_string(frames.size()));
    }
    for (const auto& f : frames) {
        if (f.shape != frames.front().shape) {
            throw dimension_error("frame shape " + f.shape_str() + " differs from " +
                                  frames.front().shape_str());
        }
    }
    const size_t n = frames.front().data.size();
    double worst = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double mean = 0.0;
        for (const auto& f : frames) mean += f.data[i];
        mean /= static_cast<double>(frames.size());
        double ss = 0.0;
        for (const auto& f : frames) {
            const double d = f.data[i] - mean;
            ss += d * d;
        }
        worst = std::max(worst, std::sqrt(ss / static_cast<double>(frames.size() - 1)));
    }
    return worst;
}

}  // namespace vsense
