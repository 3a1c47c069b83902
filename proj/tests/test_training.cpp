#include "vsense/training.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

using namespace vsense;

namespace {

constexpr int kWindow = 48;

// 24 train / 12 test samples: enough for several optimizer steps per epoch
// while keeping every regime run fast.
Dataset tiny_dataset(uint64_t master_seed) {
    return build_dataset(default_conditions(), kWindow, 40, master_seed, 720);
}

TrainConfig quick_config(Regime regime, int epochs = 3) {
    TrainConfig cfg;
    cfg.regime = regime;
    cfg.batch_size = 8;
    cfg.epochs = epochs;
    cfg.seed = 11;
    return cfg;
}

Dataset one_image_dataset() {
    Dataset ds;
    ds.window_len = kWindow;
    ds.conditions = default_conditions();
    for (auto& c : ds.conditions) c.seed = Rng::derive(1, c.id).state;
    Rng frame_rng = Rng::derive(ds.conditions[0].seed, 2, 0);
    Sample s;
    s.condition_id = 0;
    s.frame_index = 0;
    s.label = Label::stable;
    s.frame = render_frame(0.0, 0.0, ds.conditions[0], frame_rng);
    s.window = Tensor<float>({signal::channels, kWindow});
    ds.train.push_back(std::move(s));
    return ds;
}

template <typename A, typename B>
void expect_params_bitwise_equal(A& a, B& b) {
    auto pa = a.params();
    auto pb = b.params();
    ASSERT_EQ(pa.size(), pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        ASSERT_EQ(pa[i].tensor->data.size(), pb[i].tensor->data.size()) << pa[i].name;
        EXPECT_EQ(0, std::memcmp(pa[i].tensor->data.data(), pb[i].tensor->data.data(),
                                 pa[i].tensor->data.size() * sizeof(float)))
            << "parameter " << pa[i].name << " differs";
    }
}

void expect_bookkeeping(const TrainReport& report) {
    for (const auto& e : report.epochs) {
        const double recombined = e.lambda_emb * e.emb + e.lambda_rec * e.rec +
                                  e.lambda_cls * e.cls + e.lambda_feat * e.feat;
        EXPECT_TRUE(std::isfinite(e.total));
        EXPECT_NEAR(e.total, recombined, 1e-6);
    }
}

template <typename M>
double accuracy_on(M& model, const std::vector<Sample>& data) {
    int hits = 0;
    for (const auto& s : data) {
        Tensor<float> x({1, 1, signal::frame_h, signal::frame_w});
        std::copy(s.frame.data.begin(), s.frame.data.end(), x.data.begin());
        const auto z = model.forward(x, false);
        if (predict_label(static_cast<double>(z.at(0, 0))) == s.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

// Shared corpus plus a short autoencoder pretrain reused by all regimes that
// need frozen image models.
class TrainingSuite : public ::testing::Test {
  protected:
    static void SetUpTestSuite() {
        ds_ = new Dataset(tiny_dataset(21));
        ae_ = new AeResult(pretrain_autoencoder(*ds_, quick_config(Regime::AE)));
    }
    static void TearDownTestSuite() {
        delete ds_;
        delete ae_;
        ds_ = nullptr;
        ae_ = nullptr;
    }

    const Dataset& ds() { return *ds_; }
    ImageEncoder<float>& encoder() { return ae_->encoder; }
    ImageDecoder<float>& decoder() { return ae_->decoder; }

    static Dataset* ds_;
    static AeResult* ae_;
};

Dataset* TrainingSuite::ds_ = nullptr;
AeResult* TrainingSuite::ae_ = nullptr;

TEST(RegimeNames, RoundTripsEveryRegime) {
    for (Regime r : all_regimes()) {
        EXPECT_EQ(r, regime_from_name(regime_name(r)));
    }
    EXPECT_THROW((void)regime_from_name("VS3"), parameter_error);
    EXPECT_THROW((void)regime_from_name("vs1"), parameter_error);
}

TEST(RegimeNames, EffectiveLambdasZeroIrrelevantWeights) {
    TrainConfig cfg;
    cfg.lambda_emb = 2.0;
    cfg.lambda_rec = 3.0;
    cfg.lambda_cls = 5.0;
    cfg.lambda_feat = 7.0;
    auto expect = [&](Regime r, double emb, double rec, double cls, double feat) {
        const Lambdas l = effective_lambdas(r, cfg);
        EXPECT_EQ(emb, l.emb) << regime_name(r);
        EXPECT_EQ(rec, l.rec) << regime_name(r);
        EXPECT_EQ(cls, l.cls) << regime_name(r);
        EXPECT_EQ(feat, l.feat) << regime_name(r);
    };
    expect(Regime::AE, 0, 3, 0, 0);
    expect(Regime::VS1, 2, 3, 0, 0);
    expect(Regime::VS1A, 0, 3, 0, 0);
    expect(Regime::VS1B, 2, 3, 0, 7);
    expect(Regime::VS2, 2, 3, 5, 0);
    expect(Regime::VS2A, 2, 3, 5, 0);
    expect(Regime::XMODAL, 2, 0, 0, 0);
    expect(Regime::IMG_CLS, 0, 0, 5, 0);
    expect(Regime::TS_CLS, 0, 0, 5, 0);
}

TEST(TrainConfigValidation, RejectsBadHyperparameters) {
    Dataset ds = one_image_dataset();
    auto with = [](auto mutate) {
        TrainConfig cfg;
        mutate(cfg);
        return cfg;
    };
    EXPECT_THROW(pretrain_autoencoder(ds, with([](TrainConfig& c) { c.lr = 0.0; })),
                 parameter_error);
    EXPECT_THROW(pretrain_autoencoder(ds, with([](TrainConfig& c) { c.batch_size = 0; })),
                 parameter_error);
    EXPECT_THROW(pretrain_autoencoder(ds, with([](TrainConfig& c) { c.epochs = 0; })),
                 parameter_error);
    EXPECT_THROW(pretrain_autoencoder(ds, with([](TrainConfig& c) { c.lambda_rec = -1.0; })),
                 parameter_error);
    EXPECT_THROW(pretrain_autoencoder(ds, with([](TrainConfig& c) { c.dropout_rate = 1.0; })),
                 parameter_error);
    EXPECT_THROW(pretrain_autoencoder(ds, with([](TrainConfig& c) { c.dropout_rate = -0.1; })),
                 parameter_error);
}

TEST(TrainConfigValidation, RejectsEmptyTrainingSplit) {
    Dataset ds = one_image_dataset();
    ds.train.clear();
    EXPECT_THROW(pretrain_autoencoder(ds, TrainConfig{}), parameter_error);
}

TEST(Batching, WindowsAreTransposedAndScaled) {
    std::vector<Sample> data(1);
    data[0].window = Tensor<float>({signal::channels, 5});
    for (int c = 0; c < signal::channels; ++c) {
        for (int t = 0; t < 5; ++t) data[0].window.at(c, t) = static_cast<float>(100 * c + t);
    }
    const std::vector<int> order = {0};
    auto batch = detail::batch_windows(data, order, 0, 1, 5);
    ASSERT_EQ(std::vector<int>({1, 5, signal::channels}), batch.shape);
    for (int t = 0; t < 5; ++t) {
        for (int c = 0; c < signal::channels; ++c) {
            EXPECT_FLOAT_EQ(static_cast<float>((100 * c + t) / signal::input_norm_pa),
                            batch.at(0, t, c));
        }
    }
}

TEST(Batching, ShuffleIsSeededPermutation) {
    auto idx = detail::shuffled_indices(100, 7, 0);
    auto sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> iota(100);
    std::iota(iota.begin(), iota.end(), 0);
    EXPECT_EQ(iota, sorted);
    EXPECT_EQ(idx, detail::shuffled_indices(100, 7, 0));
    EXPECT_NE(idx, detail::shuffled_indices(100, 7, 1));
    EXPECT_NE(idx, detail::shuffled_indices(100, 8, 0));
}

TEST(Bookkeeping, GuardsRejectNonFiniteAndInconsistentTotals) {
    Lambdas lam;
    lam.rec = 1.0;
    detail::LossAccum bad;
    bad.add(lam, 0.0, std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0, 4);
    EXPECT_THROW((void)detail::finish_epoch(bad, lam), invariant_violation);

    detail::LossAccum skewed;
    skewed.add(lam, 0.0, 0.5, 0.0, 0.0, 4);
    skewed.total = 999.0;
    EXPECT_THROW((void)detail::finish_epoch(skewed, lam), invariant_violation);
}

TEST(Autoencoder, OverfitsOneImage) {
    Dataset ds = one_image_dataset();
    TrainConfig cfg;
    // At batch size 1 on a mostly-dark target the default step size drives
    // the output sigmoid into full saturation; a gentler rate overfits fast.
    cfg.lr = 0.0003;
    cfg.batch_size = 1;
    cfg.epochs = 200;
    cfg.seed = 3;
    auto r = pretrain_autoencoder(ds, cfg);
    EXPECT_LT(r.report.final_total(), 1e-3);
    EXPECT_LT(r.report.final_total(), r.report.first_total());
    expect_bookkeeping(r.report);
}

TEST_F(TrainingSuite, AutoencoderLossDecreases) {
    const auto& report = ae_->report;
    ASSERT_EQ(3u, report.epochs.size());
    EXPECT_LT(report.final_total(), report.first_total());
    for (const auto& e : report.epochs) {
        EXPECT_EQ(0.0, e.lambda_emb);
        EXPECT_EQ(0.0, e.lambda_cls);
        EXPECT_EQ(0.0, e.lambda_feat);
        EXPECT_GT(e.rec, 0.0);
    }
    expect_bookkeeping(report);
}

TEST_F(TrainingSuite, Vs1BothComponentsDecreaseAndEncoderStaysFrozen) {
    const uint64_t before = param_hash(encoder());
    auto r = train_vsensenet1(ds(), encoder(), quick_config(Regime::VS1));
    EXPECT_EQ(before, param_hash(encoder()));
    ASSERT_EQ(3u, r.report.epochs.size());
    EXPECT_LT(r.report.epochs.back().emb, r.report.epochs.front().emb);
    EXPECT_LT(r.report.epochs.back().rec, r.report.epochs.front().rec);
    EXPECT_LT(r.report.final_total(), r.report.first_total());
    for (const auto& e : r.report.epochs) {
        EXPECT_EQ(0.0, e.lambda_cls);
        EXPECT_EQ(0.0, e.lambda_feat);
    }
    expect_bookkeeping(r.report);
}

TEST_F(TrainingSuite, Vs1ATrainsWithoutTouchingAnyEncoder) {
    auto r = train_vsensenet1A(ds(), quick_config(Regime::VS1A));
    EXPECT_LT(r.report.final_total(), r.report.first_total());
    for (const auto& e : r.report.epochs) {
        EXPECT_EQ(0.0, e.emb);
        EXPECT_EQ(0.0, e.lambda_emb);
    }
    expect_bookkeeping(r.report);
}

TEST_F(TrainingSuite, Vs1BDistillsAgainstFrozenTeacher) {
    const uint64_t teacher_before = param_hash(decoder());
    decoder().forward_calls = 0;
    auto r = train_vsensenet1B(ds(), encoder(), decoder(), quick_config(Regime::VS1B));
    EXPECT_EQ(teacher_before, param_hash(decoder()));
    EXPECT_GT(decoder().forward_calls, 0);
    EXPECT_LT(r.report.epochs.back().feat, r.report.epochs.front().feat);
    EXPECT_LT(r.report.final_total(), r.report.first_total());
    for (const auto& e : r.report.epochs) EXPECT_GT(e.feat, 0.0);
    expect_bookkeeping(r.report);
}

TEST_F(TrainingSuite, Vs2PhasesEachReduceTheirComponents) {
    TrainConfig cfg = quick_config(Regime::VS2);
    auto r = train_vsensenet2(ds(), encoder(), cfg);
    ASSERT_EQ(6u, r.report.epochs.size());
    // Phase 1 records carry only the embedding weight; phase 2 only rec+cls.
    const auto& p1_first = r.report.epochs[0];
    const auto& p1_last = r.report.epochs[2];
    const auto& p2_first = r.report.epochs[3];
    const auto& p2_last = r.report.epochs[5];
    EXPECT_GT(p1_first.lambda_emb, 0.0);
    EXPECT_EQ(0.0, p1_first.lambda_rec);
    EXPECT_EQ(0.0, p2_first.lambda_emb);
    EXPECT_GT(p2_first.lambda_rec, 0.0);
    EXPECT_GT(p2_first.lambda_cls, 0.0);
    EXPECT_LT(p1_last.emb, p1_first.emb);
    EXPECT_LT(p2_last.rec, p2_first.rec);
    EXPECT_LT(p2_last.cls, p2_first.cls);
    expect_bookkeeping(r.report);
}

TEST_F(TrainingSuite, Vs2ATrainsAllThreeComponentsJointly) {
    auto r = train_vsensenet2A(ds(), encoder(), quick_config(Regime::VS2A));
    const auto& first = r.report.epochs.front();
    EXPECT_GT(first.emb, 0.0);
    EXPECT_GT(first.rec, 0.0);
    EXPECT_GT(first.cls, 0.0);
    EXPECT_LT(r.report.final_total(), r.report.first_total());
    expect_bookkeeping(r.report);
}

TEST_F(TrainingSuite, XmodalTrainsOnlyTheTsEncoder) {
    const uint64_t enc_before = param_hash(encoder());
    const uint64_t dec_before = param_hash(decoder());
    decoder().forward_calls = 0;
    auto r = train_crossmodal_baseline(ds(), encoder(), decoder(), quick_config(Regime::XMODAL));
    EXPECT_EQ(enc_before, param_hash(encoder()));
    EXPECT_EQ(dec_before, param_hash(decoder()));
    EXPECT_EQ(0, decoder().forward_calls);
    EXPECT_LT(r.report.final_total(), r.report.first_total());
    for (const auto& e : r.report.epochs) {
        EXPECT_EQ(0.0, e.lambda_rec);
        EXPECT_EQ(0.0, e.rec);
    }
    expect_bookkeeping(r.report);
}

// Accuracy-level checks need more windows per condition than the tiny corpus
// carries, both for optimizer steps and for a statistically meaningful test
// split.
Dataset medium_dataset(uint64_t master_seed) {
    return build_dataset(default_conditions(), kWindow, 16, master_seed, 3000);
}

TEST(ImageClassifier, SeparatesTheSyntheticClasses) {
    Dataset ds = medium_dataset(41);
    TrainConfig cfg = quick_config(Regime::IMG_CLS, 10);
    cfg.lr = 0.003;
    auto r = train_image_classifier(ds, cfg);
    EXPECT_LT(r.report.final_total(), r.report.first_total());
    EXPECT_GT(accuracy_on(r.classifier, ds.train), 0.9);
    EXPECT_GT(accuracy_on(r.classifier, ds.test), 0.9);
    expect_bookkeeping(r.report);
}

// Labels are re-dealt within each training condition so that exactly half of
// every condition flips: no feature, condition-level or class-level, retains
// any association with the labels, and held-out accuracy must sit at chance.
TEST(ImageClassifier, PermutedLabelsGiveChanceTestAccuracy) {
    Dataset ds = medium_dataset(41);
    std::map<int, std::vector<size_t>> by_condition;
    for (size_t i = 0; i < ds.train.size(); ++i) {
        by_condition[ds.train[i].condition_id].push_back(i);
    }
    Rng rng = Rng::derive(99, 0);
    for (auto& [cid, idx] : by_condition) {
        for (size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[static_cast<size_t>(rng.next_u64() % i)]);
        }
        for (size_t i = 0; i < idx.size() / 2; ++i) {
            Label& lab = ds.train[idx[i]].label;
            lab = lab == Label::stable ? Label::unstable : Label::stable;
        }
    }

    TrainConfig cfg = quick_config(Regime::IMG_CLS, 6);
    cfg.lr = 0.003;
    auto r = train_image_classifier(ds, cfg);
    const double acc = accuracy_on(r.classifier, ds.test);
    EXPECT_NEAR(0.5, acc, 0.15);
}

TEST_F(TrainingSuite, TsClassifierLossDecreases) {
    auto r = train_ts_classifier(ds(), quick_config(Regime::TS_CLS));
    EXPECT_LT(r.report.final_total(), r.report.first_total());
    expect_bookkeeping(r.report);
}

TEST_F(TrainingSuite, Vs1WithZeroEmbeddingWeightMatchesVs1ABitwise) {
    TrainConfig cfg = quick_config(Regime::VS1, 2);
    cfg.lambda_emb = 0.0;
    encoder().forward_calls = 0;
    auto a = train_vsensenet1(ds(), encoder(), cfg);
    EXPECT_EQ(0, encoder().forward_calls);

    auto b = train_vsensenet1A(ds(), cfg);
    expect_params_bitwise_equal(a.ts_encoder, b.ts_encoder);
    expect_params_bitwise_equal(a.decoder, b.decoder);
    ASSERT_EQ(a.report.epochs.size(), b.report.epochs.size());
    for (size_t i = 0; i < a.report.epochs.size(); ++i) {
        EXPECT_EQ(a.report.epochs[i].rec, b.report.epochs[i].rec);
        EXPECT_EQ(a.report.epochs[i].total, b.report.epochs[i].total);
    }
}

TEST_F(TrainingSuite, Vs1BWithZeroFeatureWeightMatchesVs1Bitwise) {
    TrainConfig cfg = quick_config(Regime::VS1B, 2);
    cfg.lambda_feat = 0.0;
    decoder().forward_calls = 0;
    auto a = train_vsensenet1B(ds(), encoder(), decoder(), cfg);
    EXPECT_EQ(0, decoder().forward_calls);

    auto b = train_vsensenet1(ds(), encoder(), cfg);
    expect_params_bitwise_equal(a.ts_encoder, b.ts_encoder);
    expect_params_bitwise_equal(a.decoder, b.decoder);
}

TEST_F(TrainingSuite, Vs2AWithZeroClassifierWeightDiffersFromVs1OnlyByClassifier) {
    TrainConfig cfg = quick_config(Regime::VS2A, 2);
    cfg.lambda_cls = 0.0;
    auto a = train_vsensenet2A(ds(), encoder(), cfg);
    auto b = train_vsensenet1(ds(), encoder(), cfg);
    expect_params_bitwise_equal(a.ts_encoder, b.ts_encoder);
    expect_params_bitwise_equal(a.decoder, b.decoder);

    ImageClassifier<float> untouched;
    Rng rng = detail::init_rng(cfg.seed, Role::image_classifier);
    untouched.init(rng);
    expect_params_bitwise_equal(a.classifier, untouched);
}

TEST_F(TrainingSuite, Vs2RejectsStepTwoBeforeStepOne) {
    Vs2Step1 incomplete{TsEncoder<float>(ds().window_len, 0.2), false, {}};
    EXPECT_THROW((void)train_vsensenet2_step2(ds(), incomplete, quick_config(Regime::VS2, 1)),
                 sequencing_error);
}

TEST_F(TrainingSuite, Vs2ClassifierSeesExactDecoderOutputs) {
    TrainConfig cfg = quick_config(Regime::VS2, 2);
    cfg.trace = true;
    auto r = train_vsensenet2(ds(), encoder(), cfg);
    ASSERT_FALSE(r.decoder.output_hashes.empty());
    EXPECT_EQ(r.decoder.output_hashes, r.classifier.input_hashes);
}

TEST_F(TrainingSuite, Vs2StepTwoLeavesTsEncoderUntouched) {
    TrainConfig cfg = quick_config(Regime::VS2, 2);
    auto step1 = train_vsensenet2_step1(ds(), encoder(), cfg);
    const uint64_t frozen = param_hash(step1.ts_encoder);
    auto r = train_vsensenet2_step2(ds(), step1, cfg);
    EXPECT_EQ(frozen, param_hash(r.ts_encoder));
}

TEST(Classifiers, RejectSingleClassTraining) {
    Dataset ds = tiny_dataset(33);
    ds.train.erase(std::remove_if(ds.train.begin(), ds.train.end(),
                                  [](const Sample& s) { return s.label == Label::unstable; }),
                   ds.train.end());
    ASSERT_FALSE(ds.train.empty());
    EXPECT_THROW((void)train_image_classifier(ds, quick_config(Regime::IMG_CLS, 1)),
                 parameter_error);
    EXPECT_THROW((void)train_ts_classifier(ds, quick_config(Regime::TS_CLS, 1)), parameter_error);
    EXPECT_NO_THROW((void)pretrain_autoencoder(ds, quick_config(Regime::AE, 1)));
}

TEST(Classifiers, TsClassifierNeverReadsImageTensors) {
    Dataset ds = tiny_dataset(34);
    for (auto& s : ds.train) {
        std::fill(s.frame.data.begin(), s.frame.data.end(),
                  std::numeric_limits<float>::quiet_NaN());
    }
    // Any regime consuming frames trips the layer finiteness guard; the time
    // series classifier must train through the poisoned frames untouched.
    EXPECT_THROW((void)train_image_classifier(ds, quick_config(Regime::IMG_CLS, 1)),
                 parameter_error);
    auto r = train_ts_classifier(ds, quick_config(Regime::TS_CLS, 2));
    for (const auto& e : r.report.epochs) EXPECT_TRUE(std::isfinite(e.total));
    EXPECT_LT(r.report.final_total(), r.report.first_total());
}

TEST_F(TrainingSuite, EqualSeedsReproduceBitwiseUnequalSeedsDoNot) {
    TrainConfig cfg = quick_config(Regime::VS1, 2);
    cfg.seed = 5;
    auto a = train_vsensenet1(ds(), encoder(), cfg);
    auto b = train_vsensenet1(ds(), encoder(), cfg);
    expect_params_bitwise_equal(a.ts_encoder, b.ts_encoder);
    expect_params_bitwise_equal(a.decoder, b.decoder);
    ASSERT_EQ(a.report.epochs.size(), b.report.epochs.size());
    for (size_t i = 0; i < a.report.epochs.size(); ++i) {
        EXPECT_EQ(a.report.epochs[i].total, b.report.epochs[i].total);
    }

    cfg.seed = 6;
    auto c = train_vsensenet1(ds(), encoder(), cfg);
    EXPECT_NE(param_hash(a.ts_encoder), param_hash(c.ts_encoder));
}

}  // namespace
