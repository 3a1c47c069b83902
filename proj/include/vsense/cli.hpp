#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "vsense/config.hpp"
#include "vsense/pipeline.hpp"

namespace vsense {

// --------------------------------------------------------------------------
// Output layout: {out}/{regime}/{seed}/<part>.vsnm next to that run's
// train_report.json, plus top-level dataset, manifest, and report files.
// Independent (regime, seed) runs write disjoint directories.
// --------------------------------------------------------------------------

struct OutPaths {
    std::string root;

    std::string dataset() const { return root + "/dataset.vsns"; }
    std::string dataset_manifest() const { return root + "/dataset_manifest.json"; }
    std::string run_dir(Regime r, uint64_t seed) const { return root + "/" + run_rel(r, seed); }
    std::string model_file(Regime r, uint64_t seed, const std::string& name) const {
        return run_dir(r, seed) + "/" + name;
    }
    std::string train_report(Regime r, uint64_t seed) const {
        return run_dir(r, seed) + "/train_report.json";
    }
    std::string run_meta(Regime r, uint64_t seed) const {
        return run_dir(r, seed) + "/run_meta.json";
    }
    std::string eval_report() const { return root + "/eval_report.json"; }
    std::string report_table() const { return root + "/report_table.txt"; }
    std::string recon_dir() const { return root + "/reconstructions"; }

    // Root-relative form used inside report files so that two executions of
    // one config into different directories stay byte-identical.
    static std::string run_rel(Regime r, uint64_t seed) {
        return std::string(regime_name(r)) + "/" + std::to_string(seed);
    }
    static std::string model_rel(Regime r, uint64_t seed, const std::string& name) {
        return run_rel(r, seed) + "/" + name;
    }
};

inline std::string hex_u64(uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Config echo embedded in every JSON artifact. The output directory is
/// deliberately absent: it is where a run lives, not what the run is, and
/// artifacts must not change content when the tree is rooted elsewhere.
inline nlohmann::ordered_json config_echo_json(const RunConfig& cfg) {
    auto j = run_config_to_json(cfg);
    j.erase("out");
    return j;
}

namespace detail {

inline const std::vector<std::string>& artifact_files(Regime r) {
    static const std::vector<std::string> ae = {"image_encoder.vsnm", "image_decoder.vsnm"};
    static const std::vector<std::string> vs1 = {"ts_encoder.vsnm", "image_decoder.vsnm"};
    static const std::vector<std::string> vs2 = {"ts_encoder.vsnm", "image_decoder.vsnm",
                                                 "image_classifier.vsnm"};
    static const std::vector<std::string> xmodal = {"ts_encoder.vsnm"};
    static const std::vector<std::string> img_cls = {"image_classifier.vsnm"};
    static const std::vector<std::string> ts_cls = {"ts_classifier.vsnm"};
    switch (r) {
        case Regime::AE: return ae;
        case Regime::VS1:
        case Regime::VS1A:
        case Regime::VS1B: return vs1;
        case Regime::VS2:
        case Regime::VS2A: return vs2;
        case Regime::XMODAL: return xmodal;
        case Regime::IMG_CLS: return img_cls;
        case Regime::TS_CLS: return ts_cls;
    }
    throw parameter_error("unknown regime");
}

/// Frozen pretrained parts a regime consumes before it can train.
inline std::vector<std::pair<Regime, std::string>> training_prerequisites(Regime r) {
    switch (r) {
        case Regime::VS1:
        case Regime::VS2:
        case Regime::VS2A: return {{Regime::AE, "image_encoder.vsnm"}};
        case Regime::VS1B:
        case Regime::XMODAL:
            return {{Regime::AE, "image_encoder.vsnm"}, {Regime::AE, "image_decoder.vsnm"}};
        default: return {};
    }
}

inline bool regime_reconstructs(Regime r) {
    switch (r) {
        case Regime::VS1:
        case Regime::VS1A:
        case Regime::VS1B:
        case Regime::VS2:
        case Regime::VS2A:
        case Regime::XMODAL: return true;
        default: return false;
    }
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

inline void require_dataset_file(const OutPaths& paths) {
    if (!std::filesystem::exists(paths.dataset())) {
        throw dependency_error("no dataset at " + paths.dataset() + "; run generate first");
    }
}

/// The dataset on disk must be the one this config describes, not a stale
/// file from an earlier configuration.
inline Dataset read_matching_dataset(const OutPaths& paths, const RunConfig& cfg) {
    Dataset ds = read_dataset(paths.dataset());
    const uint64_t want =
        dataset_config_hash(cfg.conditions, cfg.master_seed, cfg.window_len, cfg.stride,
                            cfg.test_stride, cfg.n_pressure_samples);
    if (ds.config_hash != want) {
        throw incompatibility_error("dataset at " + paths.dataset() +
                                    " was generated under a different config; rerun generate");
    }
    return ds;
}

template <typename Model>
ModelFileInfo load_part(std::vector<std::pair<std::string, ModelFileInfo>>& parts, Model& model,
                        const std::string& path) {
    ModelFileInfo info = load_model(model, path);
    parts.emplace_back(path, info);
    return info;
}

inline nlohmann::ordered_json epochs_json(const TrainReport& rep) {
    auto arr = nlohmann::ordered_json::array();
    for (const EpochLoss& e : rep.epochs) {
        nlohmann::ordered_json je;
        je["emb"] = e.emb;
        je["rec"] = e.rec;
        je["cls"] = e.cls;
        je["feat"] = e.feat;
        je["lambda_emb"] = e.lambda_emb;
        je["lambda_rec"] = e.lambda_rec;
        je["lambda_cls"] = e.lambda_cls;
        je["lambda_feat"] = e.lambda_feat;
        je["total"] = e.total;
        arr.push_back(je);
    }
    return arr;
}

inline void write_json(const std::string& path, const nlohmann::ordered_json& j) {
    atomic_write_text(path, j.dump(2) + "\n");
}

/// Runs one (regime, seed) training, writes its model files, and returns the
/// report with root-relative artifact paths filled in.
inline TrainReport train_one(const OutPaths& paths, const Dataset& ds, const RunConfig& cfg,
                             Regime regime, uint64_t seed, uint64_t chash) {
    TrainConfig tc = cfg.training.at(regime);
    tc.regime = regime;
    tc.seed = seed;

    const auto save = [&](auto& model, const std::string& name, TrainReport& rep) {
        save_model(model, paths.model_file(regime, seed, name), chash, seed);
        rep.model_paths.push_back(OutPaths::model_rel(regime, seed, name));
    };
    const auto load_frozen = [&](auto& model, const std::string& name) {
        const std::string path = paths.model_file(Regime::AE, seed, name);
        const ModelFileInfo info = load_model(model, path);
        if (info.config_hash != chash || info.seed != seed) {
            throw incompatibility_error(path +
                                        " was trained under a different run config or seed; "
                                        "retrain AE first");
        }
    };

    switch (regime) {
        case Regime::AE: {
            auto r = pretrain_autoencoder(ds, tc);
            save(r.encoder, "image_encoder.vsnm", r.report);
            save(r.decoder, "image_decoder.vsnm", r.report);
            return r.report;
        }
        case Regime::VS1: {
            ImageEncoder<float> enc;
            load_frozen(enc, "image_encoder.vsnm");
            auto r = train_vsensenet1(ds, enc, tc);
            save(r.ts_encoder, "ts_encoder.vsnm", r.report);
            save(r.decoder, "image_decoder.vsnm", r.report);
            return r.report;
        }
        case Regime::VS1A: {
            auto r = train_vsensenet1A(ds, tc);
            save(r.ts_encoder, "ts_encoder.vsnm", r.report);
            save(r.decoder, "image_decoder.vsnm", r.report);
            return r.report;
        }
        case Regime::VS1B: {
            ImageEncoder<float> enc;
            ImageDecoder<float> teacher;
            load_frozen(enc, "image_encoder.vsnm");
            load_frozen(teacher, "image_decoder.vsnm");
            auto r = train_vsensenet1B(ds, enc, teacher, tc);
            save(r.ts_encoder, "ts_encoder.vsnm", r.report);
            save(r.decoder, "image_decoder.vsnm", r.report);
            return r.report;
        }
        case Regime::VS2: {
            ImageEncoder<float> enc;
            load_frozen(enc, "image_encoder.vsnm");
            auto r = train_vsensenet2(ds, enc, tc);
            save(r.ts_encoder, "ts_encoder.vsnm", r.report);
            save(r.decoder, "image_decoder.vsnm", r.report);
            save(r.classifier, "image_classifier.vsnm", r.report);
            return r.report;
        }
        case Regime::VS2A: {
            ImageEncoder<float> enc;
            load_frozen(enc, "image_encoder.vsnm");
            auto r = train_vsensenet2A(ds, enc, tc);
            save(r.ts_encoder, "ts_encoder.vsnm", r.report);
            save(r.decoder, "image_decoder.vsnm", r.report);
            save(r.classifier, "image_classifier.vsnm", r.report);
            return r.report;
        }
        case Regime::XMODAL: {
            ImageEncoder<float> enc;
            ImageDecoder<float> dec;
            load_frozen(enc, "image_encoder.vsnm");
            load_frozen(dec, "image_decoder.vsnm");
            auto r = train_crossmodal_baseline(ds, enc, dec, tc);
            save(r.ts_encoder, "ts_encoder.vsnm", r.report);
            return r.report;
        }
        case Regime::IMG_CLS: {
            auto r = train_image_classifier(ds, tc);
            save(r.classifier, "image_classifier.vsnm", r.report);
            return r.report;
        }
        case Regime::TS_CLS: {
            auto r = train_ts_classifier(ds, tc);
            save(r.classifier, "ts_classifier.vsnm", r.report);
            return r.report;
        }
    }
    throw parameter_error("unknown regime");
}

}  // namespace detail

// --------------------------------------------------------------------------
// generate: synthesize the dataset once and describe every condition with the
// same measurements the labeling oracle uses.
// --------------------------------------------------------------------------

inline nlohmann::ordered_json cmd_generate(const RunConfig& cfg) {
    validate_run_config(cfg);
    const OutPaths paths{cfg.out_dir};
    Dataset ds = build_dataset(cfg.conditions, cfg.window_len, cfg.stride, cfg.master_seed,
                               cfg.n_pressure_samples, cfg.test_stride);
    write_dataset(ds, paths.dataset());

    nlohmann::ordered_json m;
    m["config_hash"] = hex_u64(config_hash(cfg));
    m["dataset_hash"] = hex_u64(ds.config_hash);
    m["train_samples"] = ds.train.size();
    m["test_samples"] = ds.test.size();
    auto conds = nlohmann::ordered_json::array();
    for (const auto& cond : ds.conditions) {  // ds copies carry derived seeds
        PressureSeries s = synth_pressure(cond, cfg.n_pressure_samples);
        const int C = s.values.dim(0), n = s.values.dim(1);
        double mean_rms = 0.0;
        for (int c = 0; c < C; ++c) mean_rms += rms(&s.values.at(c, 0), n) / C;
        nlohmann::ordered_json jc;
        jc["id"] = cond.id;
        jc["name"] = cond.name();
        jc["label"] = cond.label == Label::unstable ? "unstable" : "stable";
        jc["split"] = cond.is_test ? "test" : "train";
        jc["rms_pa"] = mean_rms;
        if (n >= 1024) {
            const SpectrumPeak p = dominant_frequency(s.values, s.sample_rate);
            jc["dominant_freq_hz"] = p.freq;
            jc["peak_ratio"] = p.ratio;
        } else {  // spectrum needs 1024 samples; tiny smoke corpora skip it
            jc["dominant_freq_hz"] = nullptr;
            jc["peak_ratio"] = nullptr;
        }
        conds.push_back(jc);
    }
    m["conditions"] = conds;
    m["config"] = config_echo_json(cfg);
    detail::write_json(paths.dataset_manifest(), m);
    return m;
}

// --------------------------------------------------------------------------
// train / pretrain: run one regime across every configured seed. All
// prerequisites for all seeds are checked before any compute starts.
// --------------------------------------------------------------------------

inline std::vector<TrainReport> cmd_train(const RunConfig& cfg, Regime regime) {
    validate_run_config(cfg);
    const OutPaths paths{cfg.out_dir};
    const uint64_t chash = config_hash(cfg);

    detail::require_dataset_file(paths);
    std::vector<std::string> missing;
    for (uint64_t seed : cfg.seeds) {
        for (const auto& [prereq, file] : detail::training_prerequisites(regime)) {
            const std::string path = paths.model_file(prereq, seed, file);
            if (!std::filesystem::exists(path)) {
                missing.push_back(std::string(regime_name(prereq)) + " seed " +
                                  std::to_string(seed) + " (" + path + ")");
            }
        }
    }
    if (!missing.empty()) {
        const Regime prereq = detail::training_prerequisites(regime).front().first;
        throw dependency_error(std::string(regime_name(regime)) + " requires trained " +
                               regime_name(prereq) + " artifacts; missing: " +
                               detail::join(missing, ", ") + "; run `train " +
                               regime_name(prereq) + "` first");
    }

    const Dataset ds = detail::read_matching_dataset(paths, cfg);
    std::vector<TrainReport> reports;
    for (uint64_t seed : cfg.seeds) {
        const auto t0 = std::chrono::steady_clock::now();
        TrainReport rep = detail::train_one(paths, ds, cfg, regime, seed, chash);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        nlohmann::ordered_json j;
        j["regime"] = regime_name(regime);
        j["seed"] = seed;
        j["config_hash"] = hex_u64(chash);
        j["epochs"] = detail::epochs_json(rep);
        j["model_files"] = rep.model_paths;
        j["config"] = config_echo_json(cfg);
        detail::write_json(paths.train_report(regime, seed), j);

        // Timing sidecar; the only per-run file outside the byte-identity
        // guarantee, which is why it lives apart from train_report.json.
        nlohmann::ordered_json meta;
        meta["wall_seconds"] = secs;
        detail::write_json(paths.run_meta(regime, seed), meta);

        std::cout << "[" << regime_name(regime) << " seed " << seed << "] " << rep.epochs.size()
                  << " epochs, final loss " << rep.final_total() << ", " << secs << " s"
                  << std::endl;
        reports.push_back(std::move(rep));
    }
    return reports;
}

inline std::vector<TrainReport> cmd_pretrain(const RunConfig& cfg) {
    return cmd_train(cfg, Regime::AE);
}

// --------------------------------------------------------------------------
// evaluate: score every selected regime across every seed on the test split
// and aggregate into the report table.
// --------------------------------------------------------------------------

struct EvalOutcome {
    std::vector<RunEval> runs;
    std::vector<RegimeSummary> summary;
    std::string table;
};

namespace detail {

/// Loads one run's parts and scores it. Reconstructing regimes without an
/// own classification head borrow the standalone image classifier trained on
/// true frames (and the crossmodal baseline borrows the pretrained decoder),
/// always from the same seed and config.
inline RunEval eval_one(const OutPaths& paths, const Dataset& ds, const RunConfig& cfg,
                        Regime regime, uint64_t seed, uint64_t chash) {
    std::vector<std::pair<std::string, ModelFileInfo>> parts;
    parts.emplace_back("configured run", ModelFileInfo{chash, seed});

    if (regime == Regime::IMG_CLS) {
        ImageClassifier<float> cls;
        load_part(parts, cls, paths.model_file(regime, seed, "image_classifier.vsnm"));
        require_compatible_artifacts(parts);
        return eval_image_classifier_run(seed, chash, cls, ds.test);
    }
    if (regime == Regime::TS_CLS) {
        TsClassifier<float> cls(ds.window_len, cfg.training.at(regime).dropout_rate);
        load_part(parts, cls, paths.model_file(regime, seed, "ts_classifier.vsnm"));
        require_compatible_artifacts(parts);
        return eval_ts_classifier_run(seed, chash, cls, ds.test);
    }

    TsEncoder<float> ts(ds.window_len, cfg.training.at(regime).dropout_rate);
    ImageDecoder<float> dec;
    ImageClassifier<float> cls;
    load_part(parts, ts, paths.model_file(regime, seed, "ts_encoder.vsnm"));
    const Regime dec_owner = regime == Regime::XMODAL ? Regime::AE : regime;
    load_part(parts, dec, paths.model_file(dec_owner, seed, "image_decoder.vsnm"));
    const bool own_head = regime == Regime::VS2 || regime == Regime::VS2A;
    const Regime cls_owner = own_head ? regime : Regime::IMG_CLS;
    load_part(parts, cls, paths.model_file(cls_owner, seed, "image_classifier.vsnm"));
    require_compatible_artifacts(parts);
    return eval_reconstructing_run(regime, seed, chash, ts, dec, cls, ds.test);
}

inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json mean_std_json(const std::optional<MeanStd>& m) {
    if (!m) return nullptr;
    nlohmann::ordered_json j;
    j["mean"] = m->mean;
    j["std"] = m->stddev;
    return j;
}

}  // namespace detail

inline EvalOutcome cmd_evaluate(const RunConfig& cfg) {
    validate_run_config(cfg);
    const OutPaths paths{cfg.out_dir};
    const uint64_t chash = config_hash(cfg);
    detail::require_dataset_file(paths);

    std::vector<Regime> rows;
    for (Regime r : report_row_order()) {
        if (std::find(cfg.regimes.begin(), cfg.regimes.end(), r) != cfg.regimes.end()) {
            rows.push_back(r);
        }
    }
    if (rows.empty()) throw config_error("no evaluable regimes selected");

    // Every absent (regime, seed) run is enumerated in one error, including
    // the shared parts borrowed from other regimes.
    std::vector<std::string> missing;
    const auto need = [&](Regime r, uint64_t seed, const std::string& file) {
        const std::string path = paths.model_file(r, seed, file);
        if (!std::filesystem::exists(path)) {
            const std::string entry =
                std::string(regime_name(r)) + " seed " + std::to_string(seed) + " (" + path + ")";
            if (std::find(missing.begin(), missing.end(), entry) == missing.end()) {
                missing.push_back(entry);
            }
        }
    };
    for (uint64_t seed : cfg.seeds) {
        for (Regime r : rows) {
            for (const auto& file : detail::artifact_files(r)) need(r, seed, file);
            if (detail::regime_reconstructs(r) && r != Regime::VS2 && r != Regime::VS2A) {
                need(Regime::IMG_CLS, seed, "image_classifier.vsnm");
            }
            if (r == Regime::XMODAL) need(Regime::AE, seed, "image_decoder.vsnm");
        }
    }
    if (!missing.empty()) {
        throw dependency_error("evaluate needs completed runs for: " +
                               detail::join(missing, ", "));
    }

    const Dataset ds = detail::read_matching_dataset(paths, cfg);
    EvalOutcome out;
    for (Regime r : rows) {
        std::vector<RunEval> regime_runs;
        for (uint64_t seed : cfg.seeds) {
            regime_runs.push_back(detail::eval_one(paths, ds, cfg, r, seed, chash));
        }
        out.summary.push_back(aggregate_runs(regime_runs));
        out.runs.insert(out.runs.end(), regime_runs.begin(), regime_runs.end());
    }
    out.table = render_report_table(out.summary);

    nlohmann::ordered_json j;
    j["config_hash"] = hex_u64(chash);
    j["dataset"] = {{"train_samples", ds.train.size()}, {"test_samples", ds.test.size()}};
    auto runs = nlohmann::ordered_json::array();
    for (const RunEval& r : out.runs) {
        nlohmann::ordered_json jr;
        jr["regime"] = regime_name(r.regime);
        jr["seed"] = r.seed;
        jr["ssim"] = detail::opt_json(r.ssim_mean);
        jr["mse"] = detail::opt_json(r.mse_mean);
        jr["accuracy"] = detail::opt_json(r.classification.accuracy);
        jr["f1"] = detail::opt_json(r.classification.f1);
        jr["fnr"] = detail::opt_json(r.classification.fnr);
        runs.push_back(jr);
    }
    j["runs"] = runs;
    auto summary = nlohmann::ordered_json::array();
    for (const RegimeSummary& s : out.summary) {
        nlohmann::ordered_json js;
        js["regime"] = regime_name(s.regime);
        js["runs"] = s.runs;
        js["ssim"] = detail::mean_std_json(s.ssim);
        js["mse"] = detail::mean_std_json(s.mse);
        js["accuracy"] = detail::mean_std_json(s.accuracy);
        js["f1"] = detail::mean_std_json(s.f1);
        js["fnr"] = detail::mean_std_json(s.fnr);
        summary.push_back(js);
    }
    j["summary"] = summary;
    j["config"] = config_echo_json(cfg);
    detail::write_json(paths.eval_report(), j);
    atomic_write_text(paths.report_table(), out.table);
    return out;
}

// --------------------------------------------------------------------------
// report: re-render the text table from an existing evaluation report.
// --------------------------------------------------------------------------

inline std::string cmd_report(const RunConfig& cfg) {
    const OutPaths paths{cfg.out_dir};
    if (!std::filesystem::exists(paths.eval_report())) {
        throw dependency_error("no evaluation report at " + paths.eval_report() +
                               "; run evaluate first");
    }
    ByteReader r = ByteReader::from_file(paths.eval_report());
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(r.buf.begin(), r.buf.end());
    } catch (const nlohmann::json::exception& e) {
        throw format_error(paths.eval_report() + " is not valid JSON: " + e.what());
    }
    std::vector<RegimeSummary> rows;
    try {
        for (const auto& js : j.at("summary")) {
            RegimeSummary s;
            s.regime = regime_from_name(js.at("regime").get<std::string>());
            s.runs = js.at("runs").get<int>();
            const auto get = [&](const char* key) -> std::optional<MeanStd> {
                const auto& v = js.at(key);
                if (v.is_null()) return std::nullopt;
                return MeanStd{v.at("mean").get<double>(), v.at("std").get<double>()};
            };
            s.ssim = get("ssim");
            s.mse = get("mse");
            s.accuracy = get("accuracy");
            s.f1 = get("f1");
            s.fnr = get("fnr");
            rows.push_back(s);
        }
    } catch (const nlohmann::json::exception& e) {
        throw format_error(paths.eval_report() + " has an unexpected layout: " + e.what());
    }
    const std::string table = render_report_table(rows);
    atomic_write_text(paths.report_table(), table);
    return table;
}

// --------------------------------------------------------------------------
// reconstruct: dump reconstructed frames next to the matching true frames
// for offline visual inspection.
// --------------------------------------------------------------------------

inline std::vector<std::string> cmd_reconstruct(const RunConfig& cfg, Regime regime,
                                                uint32_t condition_id, int first, int count) {
    validate_run_config(cfg);
    if (!detail::regime_reconstructs(regime)) {
        throw config_error(std::string(regime_name(regime)) + " does not reconstruct frames");
    }
    const OutPaths paths{cfg.out_dir};
    const uint64_t chash = config_hash(cfg);
    detail::require_dataset_file(paths);

    std::vector<std::string> missing;
    const auto need = [&](Regime r, const std::string& file) {
        const std::string path = paths.model_file(r, cfg.seeds.front(), file);
        if (!std::filesystem::exists(path)) {
            missing.push_back(std::string(regime_name(r)) + " (" + path + ")");
        }
    };
    need(regime, "ts_encoder.vsnm");
    need(regime == Regime::XMODAL ? Regime::AE : regime, "image_decoder.vsnm");
    if (!missing.empty()) {
        throw dependency_error("reconstruct needs trained runs for: " +
                               detail::join(missing, ", "));
    }

    const Dataset ds = detail::read_matching_dataset(paths, cfg);
    const ConditionSpec* cond = nullptr;
    for (const auto& c : ds.conditions) {
        if (c.id == condition_id) cond = &c;
    }
    if (!cond) throw parameter_error("unknown condition id " + std::to_string(condition_id));

    std::vector<const Sample*> samples;
    for (const auto& s : (cond->is_test ? ds.test : ds.train)) {
        if (s.condition_id == condition_id) samples.push_back(&s);
    }
    if (first < 0 || count < 1 || static_cast<size_t>(first) + count > samples.size()) {
        throw parameter_error("frame range [" + std::to_string(first) + ", " +
                              std::to_string(first + count) + ") is out of range; condition " +
                              std::to_string(condition_id) + " has " +
                              std::to_string(samples.size()) + " frames");
    }

    // First configured seed: the dumps are one run's qualitative output.
    const uint64_t seed = cfg.seeds.front();
    std::vector<std::pair<std::string, ModelFileInfo>> parts;
    parts.emplace_back("configured run", ModelFileInfo{chash, seed});
    TsEncoder<float> ts(ds.window_len, cfg.training.at(regime).dropout_rate);
    ImageDecoder<float> dec;
    detail::load_part(parts, ts, paths.model_file(regime, seed, "ts_encoder.vsnm"));
    const Regime dec_owner = regime == Regime::XMODAL ? Regime::AE : regime;
    detail::load_part(parts, dec, paths.model_file(dec_owner, seed, "image_decoder.vsnm"));
    require_compatible_artifacts(parts);

    std::vector<Sample> chosen;
    for (int i = 0; i < count; ++i) chosen.push_back(*samples[static_cast<size_t>(first + i)]);

    const std::string comment = "config " + hex_u64(chash);
    std::vector<std::string> files;
    for (size_t lo = 0; lo < chosen.size(); lo += detail::eval_batch) {
        const size_t hi = std::min(chosen.size(), lo + detail::eval_batch);
        const auto order = detail::identity_order(chosen.size());
        auto windows = detail::batch_windows(chosen, order, lo, hi, ds.window_len);
        auto emb = ts.forward(windows, false);
        auto recon = dec.forward(emb, false);
        for (size_t i = lo; i < hi; ++i) {
            Tensor<float> frame({signal::frame_h, signal::frame_w});
            for (int y = 0; y < signal::frame_h; ++y) {
                for (int x = 0; x < signal::frame_w; ++x) {
                    frame.at(y, x) = recon.at(static_cast<int>(i - lo), 0, y, x);
                }
            }
            const std::string stem = paths.recon_dir() + "/" + std::to_string(condition_id) +
                                     "_" + std::to_string(chosen[i].frame_index) + "_";
            const std::string true_path = stem + "true.pgm";
            const std::string model_path = stem + regime_name(regime) + ".pgm";
            write_pgm(true_path, chosen[i].frame, comment);
            write_pgm(model_path, frame, comment);
            files.push_back(true_path);
            files.push_back(model_path);
        }
    }
    return files;
}

}  // namespace vsense
