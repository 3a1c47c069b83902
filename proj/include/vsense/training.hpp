#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vsense/adam.hpp"
#include "vsense/datagen.hpp"
#include "vsense/losses.hpp"
#include "vsense/models.hpp"

namespace vsense {

enum class Regime { AE, VS1, VS1A, VS1B, VS2, VS2A, XMODAL, IMG_CLS, TS_CLS };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::AE: return "AE";
        case Regime::VS1: return "VS1";
        case Regime::VS1A: return "VS1A";
        case Regime::VS1B: return "VS1B";
        case Regime::VS2: return "VS2";
        case Regime::VS2A: return "VS2A";
        case Regime::XMODAL: return "XMODAL";
        case Regime::IMG_CLS: return "IMG_CLS";
        case Regime::TS_CLS: return "TS_CLS";
    }
    return "unknown";
}

inline const std::vector<Regime>& all_regimes() {
    static const std::vector<Regime> rs = {Regime::AE,     Regime::VS1,    Regime::VS1A,
                                           Regime::VS1B,   Regime::VS2,    Regime::VS2A,
                                           Regime::XMODAL, Regime::IMG_CLS, Regime::TS_CLS};
    return rs;
}

inline Regime regime_from_name(const std::string& name) {
    for (Regime r : all_regimes()) {
        if (name == regime_name(r)) return r;
    }
    throw parameter_error("unknown regime '" + name + "'");
}

struct TrainConfig {
    Regime regime = Regime::AE;
    double lr = 0.001;
    int batch_size = 32;
    int epochs = 30;
    uint64_t seed = 1;
    double lambda_emb = 1.0;
    double lambda_rec = 1.0;
    double lambda_cls = 1.0;
    double lambda_feat = 1.0;
    double dropout_rate = 0.2;
    bool trace = false;  // record tensor hashes on the constructed models' forwards
};

/// The four loss weights with every component irrelevant to the regime
/// forced to zero, which is also what the loss report must echo.
struct Lambdas {
    double emb = 0.0, rec = 0.0, cls = 0.0, feat = 0.0;
};

inline Lambdas effective_lambdas(Regime regime, const TrainConfig& cfg) {
    Lambdas l;
    switch (regime) {
        case Regime::AE: l.rec = cfg.lambda_rec; break;
        case Regime::VS1: l.emb = cfg.lambda_emb; l.rec = cfg.lambda_rec; break;
        case Regime::VS1A: l.rec = cfg.lambda_rec; break;
        case Regime::VS1B:
            l.emb = cfg.lambda_emb;
            l.rec = cfg.lambda_rec;
            l.feat = cfg.lambda_feat;
            break;
        case Regime::VS2:
        case Regime::VS2A:
            l.emb = cfg.lambda_emb;
            l.rec = cfg.lambda_rec;
            l.cls = cfg.lambda_cls;
            break;
        case Regime::XMODAL: l.emb = cfg.lambda_emb; break;
        case Regime::IMG_CLS:
        case Regime::TS_CLS: l.cls = cfg.lambda_cls; break;
    }
    return l;
}

struct EpochLoss {
    double emb = 0.0, rec = 0.0, cls = 0.0, feat = 0.0;
    double lambda_emb = 0.0, lambda_rec = 0.0, lambda_cls = 0.0, lambda_feat = 0.0;
    double total = 0.0;
};

struct TrainReport {
    Regime regime = Regime::AE;
    uint64_t seed = 0;
    std::vector<EpochLoss> epochs;
    std::vector<std::string> model_paths;  // filled when artifacts are written

    double first_total() const { return epochs.front().total; }
    double final_total() const { return epochs.back().total; }
};

namespace detail {

inline void validate_train_config(const TrainConfig& cfg) {
    if (!(cfg.lr > 0.0)) throw parameter_error("learning rate must be > 0");
    if (cfg.batch_size < 1) throw parameter_error("batch size must be >= 1");
    if (cfg.epochs < 1) throw parameter_error("epoch count must be >= 1");
    if (cfg.lambda_emb < 0 || cfg.lambda_rec < 0 || cfg.lambda_cls < 0 || cfg.lambda_feat < 0) {
        throw parameter_error("loss weights must be >= 0");
    }
    if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0) {
        throw parameter_error("dropout rate must lie in [0,1)");
    }
}

inline void require_nonempty(const std::vector<Sample>& train_split) {
    if (train_split.empty()) throw parameter_error("training split is empty");
}

inline void require_both_classes(const std::vector<Sample>& data) {
    bool any_stable = false, any_unstable = false;
    for (const auto& s : data) (s.label == Label::stable ? any_stable : any_unstable) = true;
    if (!any_stable || !any_unstable) {
        throw parameter_error("classifier training needs both classes in the training split");
    }
}

/// Per-role initialization streams derived from the run seed, so a model's
/// starting parameters depend only on (seed, role), never on which other
/// models a regime happens to construct.
inline Rng init_rng(uint64_t seed, Role role) {
    return Rng::derive(seed, 100 + static_cast<uint64_t>(role));
}

/// Per-batch dropout stream: (seed, epoch, batch) addressable, so regimes
/// consuming the same batch schedule draw identical masks.
inline Rng dropout_rng(uint64_t seed, int epoch, int batch) {
    return Rng::derive(seed, 3, static_cast<uint64_t>(epoch), static_cast<uint64_t>(batch));
}

inline std::vector<int> shuffled_indices(size_t n, uint64_t seed, int epoch) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng::derive(seed, 2, static_cast<uint64_t>(epoch));
    for (size_t i = n; i > 1; --i) {
        std::swap(idx[i - 1], idx[static_cast<size_t>(rng.next_u64() % i)]);
    }
    return idx;
}

inline Tensor<float> batch_frames(const std::vector<Sample>& data, const std::vector<int>& order,
                                  size_t lo, size_t hi) {
    const int B = static_cast<int>(hi - lo);
    Tensor<float> out({B, 1, signal::frame_h, signal::frame_w});
    for (int n = 0; n < B; ++n) {
        const auto& f = data[static_cast<size_t>(order[lo + static_cast<size_t>(n)])].frame;
        std::copy(f.data.begin(), f.data.end(),
                  out.data.begin() + static_cast<size_t>(n) * f.data.size());
    }
    return out;
}

inline Tensor<float> batch_windows(const std::vector<Sample>& data, const std::vector<int>& order,
                                   size_t lo, size_t hi, int window_len) {
    const int B = static_cast<int>(hi - lo);
    Tensor<float> out({B, window_len, signal::channels});
    const auto scale = static_cast<float>(1.0 / signal::input_norm_pa);
    for (int n = 0; n < B; ++n) {
        const auto& w = data[static_cast<size_t>(order[lo + static_cast<size_t>(n)])].window;
        for (int t = 0; t < window_len; ++t)
            for (int c = 0; c < signal::channels; ++c) out.at(n, t, c) = w.at(c, t) * scale;
    }
    return out;
}

inline std::vector<float> batch_labels(const std::vector<Sample>& data,
                                       const std::vector<int>& order, size_t lo, size_t hi) {
    std::vector<float> y(hi - lo);
    for (size_t n = 0; n < y.size(); ++n) {
        y[n] = data[static_cast<size_t>(order[lo + n])].label == Label::unstable ? 1.0f : 0.0f;
    }
    return y;
}

struct LossAccum {
    double emb = 0, rec = 0, cls = 0, feat = 0, total = 0;
    int64_t samples = 0;

    void add(const Lambdas& lam, double c_emb, double c_rec, double c_cls, double c_feat, int B) {
        emb += c_emb * B;
        rec += c_rec * B;
        cls += c_cls * B;
        feat += c_feat * B;
        total += (lam.emb * c_emb + lam.rec * c_rec + lam.cls * c_cls + lam.feat * c_feat) * B;
        samples += B;
    }
};

/// Converts per-batch accumulation into the epoch record and enforces the
/// bookkeeping contract: finite components whose weighted sum reproduces the
/// independently accumulated total to 1e-6.
inline EpochLoss finish_epoch(const LossAccum& acc, const Lambdas& lam) {
    EpochLoss e;
    const auto n = static_cast<double>(acc.samples);
    e.emb = acc.emb / n;
    e.rec = acc.rec / n;
    e.cls = acc.cls / n;
    e.feat = acc.feat / n;
    e.lambda_emb = lam.emb;
    e.lambda_rec = lam.rec;
    e.lambda_cls = lam.cls;
    e.lambda_feat = lam.feat;
    e.total = acc.total / n;
    for (double v : {e.emb, e.rec, e.cls, e.feat, e.total}) {
        if (!std::isfinite(v)) throw invariant_violation("non-finite loss recorded");
    }
    const double recombined =
        lam.emb * e.emb + lam.rec * e.rec + lam.cls * e.cls + lam.feat * e.feat;
    if (std::fabs(recombined - e.total) > 1e-6) {
        throw invariant_violation("loss bookkeeping mismatch: total " + std::to_string(e.total) +
                                  " vs weighted components " + std::to_string(recombined));
    }
    return e;
}

template <typename M>
void check_frozen(M& model, uint64_t expected_hash, const char* name, int epoch) {
    if (param_hash(model) != expected_hash) {
        throw invariant_violation(std::string(name) + " changed during epoch " +
                                  std::to_string(epoch) + " but is declared frozen");
    }
}

template <typename T>
std::vector<ParamRef<T>> concat_params(std::vector<ParamRef<T>> a,
                                       const std::vector<ParamRef<T>>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

/// Mean BCE over a batch of logits (B,1) against 0/1 targets, plus the
/// lambda-weighted batch-mean gradient written into d_z.
inline double bce_batch(const Tensor<float>& z, const std::vector<float>& y, double lambda,
                        Tensor<float>& d_z) {
    const int B = z.dim(0);
    double loss = 0.0;
    for (int n = 0; n < B; ++n) {
        loss += bce_with_logit(static_cast<double>(z.at(n, 0)),
                               static_cast<double>(y[static_cast<size_t>(n)]));
        d_z.at(n, 0) = static_cast<float>(
            lambda *
            bce_with_logit_grad(static_cast<double>(z.at(n, 0)),
                                static_cast<double>(y[static_cast<size_t>(n)])) /
            B);
    }
    return loss / B;
}

}  // namespace detail

// --------------------------------------------------------------------------
// Training regimes. All loops share the schedule: per-epoch Fisher-Yates
// shuffle from the run seed, fixed-size batches with the last partial batch
// kept, one Adam step per batch, frozen-parameter hashes checked per epoch.
// --------------------------------------------------------------------------

struct AeResult {
    ImageEncoder<float> encoder;
    ImageDecoder<float> decoder;
    TrainReport report;
};

inline AeResult pretrain_autoencoder(const Dataset& ds, const TrainConfig& cfg) {
    detail::validate_train_config(cfg);
    detail::require_nonempty(ds.train);
    const auto& data = ds.train;
    const Lambdas lam = effective_lambdas(Regime::AE, cfg);

    AeResult r;
    Rng enc_rng = detail::init_rng(cfg.seed, Role::image_encoder);
    Rng dec_rng = detail::init_rng(cfg.seed, Role::image_decoder);
    r.encoder.init(enc_rng);
    r.decoder.init(dec_rng);
    r.encoder.trace = r.decoder.trace = cfg.trace;
    r.report.regime = Regime::AE;
    r.report.seed = cfg.seed;

    auto params = detail::concat_params(r.encoder.params(), r.decoder.params());
    Adam<float> opt(cfg.lr);
    opt.attach(params);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = detail::shuffled_indices(data.size(), cfg.seed, epoch);
        detail::LossAccum acc;
        for (size_t lo = 0; lo < data.size(); lo += static_cast<size_t>(cfg.batch_size)) {
            const size_t hi = std::min(data.size(), lo + static_cast<size_t>(cfg.batch_size));
            auto frames = detail::batch_frames(data, order, lo, hi);
            zero_grads(params);
            auto emb = r.encoder.forward(frames, true);
            auto recon = r.decoder.forward(emb, true);
            const double c_rec = mse_loss(recon, frames);
            auto d_img = mse_loss_grad(recon, frames, lam.rec);
            auto demb = r.decoder.backward(d_img);
            r.encoder.backward(demb);
            opt.step(params);
            acc.add(lam, 0.0, c_rec, 0.0, 0.0, static_cast<int>(hi - lo));
        }
        r.report.epochs.push_back(detail::finish_epoch(acc, lam));
    }
    return r;
}

struct Vs1Result {
    TsEncoder<float> ts_encoder;
    ImageDecoder<float> decoder;
    TrainReport report;
};

namespace detail {

/// Shared engine for VS1, VS1A and VS1B. The encoder is consulted only when
/// the embedding or feature weight is live; the teacher decoder only when the
/// feature weight is. A weight of exactly zero skips the component entirely,
/// which is what makes the regime reduction identities bitwise.
inline Vs1Result train_vs1_engine(const Dataset& ds, ImageEncoder<float>* frozen_encoder,
                                  ImageDecoder<float>* frozen_teacher, const TrainConfig& cfg,
                                  Regime regime) {
    validate_train_config(cfg);
    require_nonempty(ds.train);
    const auto& data = ds.train;
    const Lambdas lam = effective_lambdas(regime, cfg);
    if ((lam.emb > 0 || lam.feat > 0) && frozen_encoder == nullptr) {
        throw invariant_violation("image embedding targets need the frozen image encoder");
    }
    if (lam.feat > 0 && frozen_teacher == nullptr) {
        throw invariant_violation("feature distillation needs the frozen pretrained decoder");
    }

    Vs1Result r{TsEncoder<float>(ds.window_len, cfg.dropout_rate), ImageDecoder<float>{}, {}};
    Rng ts_rng = init_rng(cfg.seed, Role::ts_encoder);
    Rng dec_rng = init_rng(cfg.seed, Role::image_decoder);
    r.ts_encoder.init(ts_rng);
    r.decoder.init(dec_rng);
    r.ts_encoder.trace = r.decoder.trace = cfg.trace;
    r.report.regime = regime;
    r.report.seed = cfg.seed;

    const uint64_t encoder_hash = frozen_encoder ? param_hash(*frozen_encoder) : 0;
    const uint64_t teacher_hash = frozen_teacher ? param_hash(*frozen_teacher) : 0;

    auto params = concat_params(r.ts_encoder.params(), r.decoder.params());
    Adam<float> opt(cfg.lr);
    opt.attach(params);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled_indices(data.size(), cfg.seed, epoch);
        LossAccum acc;
        int batch_index = 0;
        for (size_t lo = 0; lo < data.size();
             lo += static_cast<size_t>(cfg.batch_size), ++batch_index) {
            const size_t hi = std::min(data.size(), lo + static_cast<size_t>(cfg.batch_size));
            const int B = static_cast<int>(hi - lo);
            auto windows = batch_windows(data, order, lo, hi, ds.window_len);
            auto frames = batch_frames(data, order, lo, hi);
            zero_grads(params);

            Rng drop = dropout_rng(cfg.seed, epoch, batch_index);
            auto ts_emb = r.ts_encoder.forward(windows, true, &drop);
            auto recon = r.decoder.forward(ts_emb, true);

            double c_emb = 0.0, c_feat = 0.0;
            Tensor<float> img_emb;
            if (lam.emb > 0 || lam.feat > 0) {
                img_emb = frozen_encoder->forward(frames, false);
            }
            if (lam.emb > 0) c_emb = mse_loss(ts_emb, img_emb);
            const double c_rec = mse_loss(recon, frames);

            Tensor<float> teacher_tap;
            if (lam.feat > 0) {
                frozen_teacher->forward(img_emb, false);
                teacher_tap = frozen_teacher->tap;
                if (!r.decoder.tap.same_shape(teacher_tap)) {
                    throw dimension_error("distillation tap " + r.decoder.tap.shape_str() +
                                          " vs teacher tap " + teacher_tap.shape_str());
                }
                c_feat = mse_loss(r.decoder.tap, teacher_tap);
            }

            auto d_img = mse_loss_grad(recon, frames, lam.rec);
            std::optional<Tensor<float>> d_tap;
            if (lam.feat > 0) d_tap = mse_loss_grad(r.decoder.tap, teacher_tap, lam.feat);
            auto demb = r.decoder.backward(d_img, d_tap ? &*d_tap : nullptr);
            if (lam.emb > 0) {
                auto d_emb_loss = mse_loss_grad(ts_emb, img_emb, lam.emb);
                for (size_t i = 0; i < demb.data.size(); ++i) demb.data[i] += d_emb_loss.data[i];
            }
            r.ts_encoder.backward(demb);
            opt.step(params);
            acc.add(lam, c_emb, c_rec, 0.0, c_feat, B);
        }
        r.report.epochs.push_back(finish_epoch(acc, lam));
        if (frozen_encoder) check_frozen(*frozen_encoder, encoder_hash, "image encoder", epoch);
        if (frozen_teacher) {
            check_frozen(*frozen_teacher, teacher_hash, "pretrained image decoder", epoch);
        }
    }
    return r;
}

}  // namespace detail

inline Vs1Result train_vsensenet1(const Dataset& ds, ImageEncoder<float>& frozen_encoder,
                                  const TrainConfig& cfg) {
    return detail::train_vs1_engine(ds, &frozen_encoder, nullptr, cfg, Regime::VS1);
}

inline Vs1Result train_vsensenet1A(const Dataset& ds, const TrainConfig& cfg) {
    return detail::train_vs1_engine(ds, nullptr, nullptr, cfg, Regime::VS1A);
}

inline Vs1Result train_vsensenet1B(const Dataset& ds, ImageEncoder<float>& frozen_encoder,
                                   ImageDecoder<float>& pretrained_decoder,
                                   const TrainConfig& cfg) {
    return detail::train_vs1_engine(ds, &frozen_encoder, &pretrained_decoder, cfg, Regime::VS1B);
}

// --------------------------------------------------------------------------
// Two-step regime: embedding regression, then decoder+classifier on the
// frozen encoder's generated embeddings.
// --------------------------------------------------------------------------

struct Vs2Step1 {
    TsEncoder<float> ts_encoder;
    bool completed = false;
    TrainReport report;
};

inline Vs2Step1 train_vsensenet2_step1(const Dataset& ds, ImageEncoder<float>& frozen_encoder,
                                       const TrainConfig& cfg) {
    detail::validate_train_config(cfg);
    detail::require_nonempty(ds.train);
    const auto& data = ds.train;
    Lambdas lam;
    lam.emb = cfg.lambda_emb;

    Vs2Step1 r{TsEncoder<float>(ds.window_len, cfg.dropout_rate), false, {}};
    Rng ts_rng = detail::init_rng(cfg.seed, Role::ts_encoder);
    r.ts_encoder.init(ts_rng);
    r.ts_encoder.trace = cfg.trace;
    r.report.regime = Regime::VS2;
    r.report.seed = cfg.seed;

    const uint64_t encoder_hash = param_hash(frozen_encoder);
    auto params = r.ts_encoder.params();
    Adam<float> opt(cfg.lr);
    opt.attach(params);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = detail::shuffled_indices(data.size(), cfg.seed, epoch);
        detail::LossAccum acc;
        int batch_index = 0;
        for (size_t lo = 0; lo < data.size();
             lo += static_cast<size_t>(cfg.batch_size), ++batch_index) {
            const size_t hi = std::min(data.size(), lo + static_cast<size_t>(cfg.batch_size));
            auto windows = detail::batch_windows(data, order, lo, hi, ds.window_len);
            auto frames = detail::batch_frames(data, order, lo, hi);
            zero_grads(params);
            Rng drop = detail::dropout_rng(cfg.seed, epoch, batch_index);
            auto ts_emb = r.ts_encoder.forward(windows, true, &drop);
            auto img_emb = frozen_encoder.forward(frames, false);
            const double c_emb = mse_loss(ts_emb, img_emb);
            r.ts_encoder.backward(mse_loss_grad(ts_emb, img_emb, lam.emb));
            opt.step(params);
            acc.add(lam, c_emb, 0.0, 0.0, 0.0, static_cast<int>(hi - lo));
        }
        r.report.epochs.push_back(detail::finish_epoch(acc, lam));
        detail::check_frozen(frozen_encoder, encoder_hash, "image encoder", epoch);
    }
    r.completed = true;
    return r;
}

struct Vs2Result {
    TsEncoder<float> ts_encoder;
    ImageDecoder<float> decoder;
    ImageClassifier<float> classifier;
    TrainReport report;
};

inline Vs2Result train_vsensenet2_step2(const Dataset& ds, Vs2Step1& step1,
                                        const TrainConfig& cfg) {
    detail::validate_train_config(cfg);
    detail::require_nonempty(ds.train);
    if (!step1.completed) {
        throw sequencing_error(
            "decoder/classifier step needs a completed embedding-regression step first");
    }
    const auto& data = ds.train;
    Lambdas lam;
    lam.rec = cfg.lambda_rec;
    lam.cls = cfg.lambda_cls;

    Vs2Result r{std::move(step1.ts_encoder), ImageDecoder<float>{}, ImageClassifier<float>{}, {}};
    Rng dec_rng = detail::init_rng(cfg.seed, Role::image_decoder);
    Rng cls_rng = detail::init_rng(cfg.seed, Role::image_classifier);
    r.decoder.init(dec_rng);
    r.classifier.init(cls_rng);
    r.decoder.trace = r.classifier.trace = cfg.trace;
    r.report = std::move(step1.report);

    const uint64_t ts_hash = param_hash(r.ts_encoder);
    auto params = detail::concat_params(r.decoder.params(), r.classifier.params());
    Adam<float> opt(cfg.lr);
    opt.attach(params);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = detail::shuffled_indices(data.size(), cfg.seed, epoch);
        detail::LossAccum acc;
        for (size_t lo = 0; lo < data.size(); lo += static_cast<size_t>(cfg.batch_size)) {
            const size_t hi = std::min(data.size(), lo + static_cast<size_t>(cfg.batch_size));
            const int B = static_cast<int>(hi - lo);
            auto windows = detail::batch_windows(data, order, lo, hi, ds.window_len);
            auto frames = detail::batch_frames(data, order, lo, hi);
            auto labels = detail::batch_labels(data, order, lo, hi);
            zero_grads(params);

            // Embeddings are regenerated on the fly from the frozen encoder.
            auto ts_emb = r.ts_encoder.forward(windows, false);
            auto recon = r.decoder.forward(ts_emb, true);
            const double c_rec = mse_loss(recon, frames);

            double c_cls = 0.0;
            if (lam.cls > 0) {
                auto z = r.classifier.forward(recon, true);
                Tensor<float> d_z({B, 1});
                c_cls = detail::bce_batch(z, labels, lam.cls, d_z);
                // Classification gradients stay inside the classifier; the
                // reconstruction is consumed as a detached input.
                r.classifier.backward(d_z);
            }
            r.decoder.backward(mse_loss_grad(recon, frames, lam.rec));
            opt.step(params);
            acc.add(lam, 0.0, c_rec, c_cls, 0.0, B);
        }
        r.report.epochs.push_back(detail::finish_epoch(acc, lam));
        detail::check_frozen(r.ts_encoder, ts_hash, "time series encoder", epoch);
    }
    return r;
}

inline Vs2Result train_vsensenet2(const Dataset& ds, ImageEncoder<float>& frozen_encoder,
                                  const TrainConfig& cfg) {
    auto step1 = train_vsensenet2_step1(ds, frozen_encoder, cfg);
    return train_vsensenet2_step2(ds, step1, cfg);
}

inline Vs2Result train_vsensenet2A(const Dataset& ds, ImageEncoder<float>& frozen_encoder,
                                   const TrainConfig& cfg) {
    detail::validate_train_config(cfg);
    detail::require_nonempty(ds.train);
    const auto& data = ds.train;
    const Lambdas lam = effective_lambdas(Regime::VS2A, cfg);

    Vs2Result r{TsEncoder<float>(ds.window_len, cfg.dropout_rate), ImageDecoder<float>{},
                ImageClassifier<float>{}, {}};
    Rng ts_rng = detail::init_rng(cfg.seed, Role::ts_encoder);
    Rng dec_rng = detail::init_rng(cfg.seed, Role::image_decoder);
    Rng cls_rng = detail::init_rng(cfg.seed, Role::image_classifier);
    r.ts_encoder.init(ts_rng);
    r.decoder.init(dec_rng);
    r.classifier.init(cls_rng);
    r.ts_encoder.trace = r.decoder.trace = r.classifier.trace = cfg.trace;
    r.report.regime = Regime::VS2A;
    r.report.seed = cfg.seed;

    const uint64_t encoder_hash = param_hash(frozen_encoder);
    auto params = detail::concat_params(
        detail::concat_params(r.ts_encoder.params(), r.decoder.params()), r.classifier.params());
    Adam<float> opt(cfg.lr);
    opt.attach(params);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = detail::shuffled_indices(data.size(), cfg.seed, epoch);
        detail::LossAccum acc;
        int batch_index = 0;
        for (size_t lo = 0; lo < data.size();
             lo += static_cast<size_t>(cfg.batch_size), ++batch_index) {
            const size_t hi = std::min(data.size(), lo + static_cast<size_t>(cfg.batch_size));
            const int B = static_cast<int>(hi - lo);
            auto windows = detail::batch_windows(data, order, lo, hi, ds.window_len);
            auto frames = detail::batch_frames(data, order, lo, hi);
            auto labels = detail::batch_labels(data, order, lo, hi);
            zero_grads(params);

            Rng drop = detail::dropout_rng(cfg.seed, epoch, batch_index);
            auto ts_emb = r.ts_encoder.forward(windows, true, &drop);
            auto recon = r.decoder.forward(ts_emb, true);

            double c_emb = 0.0;
            Tensor<float> img_emb;
            if (lam.emb > 0) {
                img_emb = frozen_encoder.forward(frames, false);
                c_emb = mse_loss(ts_emb, img_emb);
            }
            const double c_rec = mse_loss(recon, frames);

            double c_cls = 0.0;
            if (lam.cls > 0) {
                auto z = r.classifier.forward(recon, true);
                Tensor<float> d_z({B, 1});
                c_cls = detail::bce_batch(z, labels, lam.cls, d_z);
                r.classifier.backward(d_z);  // detached from the decoder
            }

            auto demb = r.decoder.backward(mse_loss_grad(recon, frames, lam.rec));
            if (lam.emb > 0) {
                auto d_emb_loss = mse_loss_grad(ts_emb, img_emb, lam.emb);
                for (size_t i = 0; i < demb.data.size(); ++i) demb.data[i] += d_emb_loss.data[i];
            }
            r.ts_encoder.backward(demb);
            opt.step(params);
            acc.add(lam, c_emb, c_rec, c_cls, 0.0, B);
        }
        r.report.epochs.push_back(detail::finish_epoch(acc, lam));
        detail::check_frozen(frozen_encoder, encoder_hash, "image encoder", epoch);
    }
    return r;
}

struct XmodalResult {
    TsEncoder<float> ts_encoder;
    TrainReport report;
};

inline XmodalResult train_crossmodal_baseline(const Dataset& ds,
                                              ImageEncoder<float>& frozen_encoder,
                                              ImageDecoder<float>& pretrained_decoder,
                                              const TrainConfig& cfg) {
    detail::validate_train_config(cfg);
    detail::require_nonempty(ds.train);
    const auto& data = ds.train;
    const Lambdas lam = effective_lambdas(Regime::XMODAL, cfg);

    XmodalResult r{TsEncoder<float>(ds.window_len, cfg.dropout_rate), {}};
    Rng ts_rng = detail::init_rng(cfg.seed, Role::ts_encoder);
    r.ts_encoder.init(ts_rng);
    r.ts_encoder.trace = cfg.trace;
    r.report.regime = Regime::XMODAL;
    r.report.seed = cfg.seed;

    const uint64_t encoder_hash = param_hash(frozen_encoder);
    const uint64_t decoder_hash = param_hash(pretrained_decoder);
    auto params = r.ts_encoder.params();
    Adam<float> opt(cfg.lr);
    opt.attach(params);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = detail::shuffled_indices(data.size(), cfg.seed, epoch);
        detail::LossAccum acc;
        int batch_index = 0;
        for (size_t lo = 0; lo < data.size();
             lo += static_cast<size_t>(cfg.batch_size), ++batch_index) {
            const size_t hi = std::min(data.size(), lo + static_cast<size_t>(cfg.batch_size));
            auto windows = detail::batch_windows(data, order, lo, hi, ds.window_len);
            auto frames = detail::batch_frames(data, order, lo, hi);
            zero_grads(params);
            Rng drop = detail::dropout_rng(cfg.seed, epoch, batch_index);
            auto ts_emb = r.ts_encoder.forward(windows, true, &drop);
            auto img_emb = frozen_encoder.forward(frames, false);
            const double c_emb = mse_loss(ts_emb, img_emb);
            r.ts_encoder.backward(mse_loss_grad(ts_emb, img_emb, lam.emb));
            opt.step(params);
            acc.add(lam, c_emb, 0.0, 0.0, 0.0, static_cast<int>(hi - lo));
        }
        r.report.epochs.push_back(detail::finish_epoch(acc, lam));
        detail::check_frozen(frozen_encoder, encoder_hash, "image encoder", epoch);
        detail::check_frozen(pretrained_decoder, decoder_hash, "pretrained image decoder", epoch);
    }
    return r;
}

struct ImgClsResult {
    ImageClassifier<float> classifier;
    TrainReport report;
};

inline ImgClsResult train_image_classifier(const Dataset& ds, const TrainConfig& cfg) {
    detail::validate_train_config(cfg);
    detail::require_nonempty(ds.train);
    detail::require_both_classes(ds.train);
    const auto& data = ds.train;
    const Lambdas lam = effective_lambdas(Regime::IMG_CLS, cfg);

    ImgClsResult r;
    Rng cls_rng = detail::init_rng(cfg.seed, Role::image_classifier);
    r.classifier.init(cls_rng);
    r.classifier.trace = cfg.trace;
    r.report.regime = Regime::IMG_CLS;
    r.report.seed = cfg.seed;

    auto params = r.classifier.params();
    Adam<float> opt(cfg.lr);
    opt.attach(params);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = detail::shuffled_indices(data.size(), cfg.seed, epoch);
        detail::LossAccum acc;
        for (size_t lo = 0; lo < data.size(); lo += static_cast<size_t>(cfg.batch_size)) {
            const size_t hi = std::min(data.size(), lo + static_cast<size_t>(cfg.batch_size));
            const int B = static_cast<int>(hi - lo);
            auto frames = detail::batch_frames(data, order, lo, hi);
            auto labels = detail::batch_labels(data, order, lo, hi);
            zero_grads(params);
            auto z = r.classifier.forward(frames, true);
            Tensor<float> d_z({B, 1});
            const double c_cls = detail::bce_batch(z, labels, lam.cls, d_z);
            r.classifier.backward(d_z);
            opt.step(params);
            acc.add(lam, 0.0, 0.0, c_cls, 0.0, B);
        }
        r.report.epochs.push_back(detail::finish_epoch(acc, lam));
    }
    return r;
}

struct TsClsResult {
    TsClassifier<float> classifier;
    TrainReport report;
};

inline TsClsResult train_ts_classifier(const Dataset& ds, const TrainConfig& cfg) {
    detail::validate_train_config(cfg);
    detail::require_nonempty(ds.train);
    detail::require_both_classes(ds.train);
    const auto& data = ds.train;
    const Lambdas lam = effective_lambdas(Regime::TS_CLS, cfg);

    TsClsResult r{TsClassifier<float>(ds.window_len, cfg.dropout_rate), {}};
    Rng cls_rng = detail::init_rng(cfg.seed, Role::ts_classifier);
    r.classifier.init(cls_rng);
    r.report.regime = Regime::TS_CLS;
    r.report.seed = cfg.seed;

    auto params = r.classifier.params();
    Adam<float> opt(cfg.lr);
    opt.attach(params);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = detail::shuffled_indices(data.size(), cfg.seed, epoch);
        detail::LossAccum acc;
        int batch_index = 0;
        for (size_t lo = 0; lo < data.size();
             lo += static_cast<size_t>(cfg.batch_size), ++batch_index) {
            const size_t hi = std::min(data.size(), lo + static_cast<size_t>(cfg.batch_size));
            const int B = static_cast<int>(hi - lo);
            auto windows = detail::batch_windows(data, order, lo, hi, ds.window_len);
            auto labels = detail::batch_labels(data, order, lo, hi);
            zero_grads(params);
            Rng drop = detail::dropout_rng(cfg.seed, epoch, batch_index);
            auto z = r.classifier.forward(windows, true, &drop);
            Tensor<float> d_z({B, 1});
            const double c_cls = detail::bce_batch(z, labels, lam.cls, d_z);
            r.classifier.backward(d_z);
            opt.step(params);
            acc.add(lam, 0.0, 0.0, c_cls, 0.0, B);
        }
        r.report.epochs.push_back(detail::finish_epoch(acc, lam));
    }
    return r;
}

}  // namespace vsense
