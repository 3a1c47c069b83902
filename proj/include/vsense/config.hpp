#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "vsense/datagen.hpp"
#include "vsense/errors.hpp"
#include "vsense/training.hpp"

namespace vsense {

// --------------------------------------------------------------------------
// RunConfig: one JSON document drives generation, training, and evaluation.
// Missing keys fall back to defaults; unknown keys are rejected so typos
// fail fast instead of silently running a different experiment.
// --------------------------------------------------------------------------

struct RunConfig {
    // dataset
    std::vector<ConditionSpec> conditions = default_conditions();
    int window_len = 75;
    int stride = 12;
    int test_stride = 18;
    int n_pressure_samples = 27000;
    uint64_t master_seed = 7;

    // runs
    std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
    std::vector<Regime> regimes;  // selection set, canonical order
    std::map<Regime, TrainConfig> training;
    std::string out_dir = "out";
};

/// Per-regime budgets for the desk-scale default run. Reconstruction-training
/// regimes run at lr 3e-4: the frames are mostly near-zero background, and at
/// the common 1e-3 step size Adam drives the output sigmoid into saturation
/// on that background, collapsing every reconstruction to black. Classifier
/// heads have no such path and take larger steps.
inline TrainConfig default_train_config(Regime regime) {
    TrainConfig cfg;
    cfg.regime = regime;
    switch (regime) {
        case Regime::AE:
            cfg.lr = 0.0003;
            cfg.epochs = 3;
            break;
        case Regime::VS1:
            cfg.lr = 0.0003;
            cfg.epochs = 6;
            break;
        case Regime::VS1A:
        case Regime::VS1B:
        case Regime::VS2A:
        case Regime::XMODAL:
            cfg.lr = 0.0003;
            cfg.epochs = 1;
            break;
        case Regime::VS2:
            cfg.lr = 0.0003;
            cfg.epochs = 4;  // per step: 4 embedding-regression + 4 decoder/classifier
            break;
        case Regime::IMG_CLS:
            cfg.lr = 0.003;
            cfg.epochs = 12;
            break;
        case Regime::TS_CLS:
            cfg.lr = 0.001;
            cfg.epochs = 2;
            break;
    }
    return cfg;
}

inline RunConfig default_run_config() {
    RunConfig cfg;
    cfg.regimes = all_regimes();
    for (Regime r : cfg.regimes) cfg.training[r] = default_train_config(r);
    return cfg;
}

inline void validate_run_config(const RunConfig& cfg) {
    if (cfg.window_len < 1) throw config_error("dataset.window must be >= 1");
    if (cfg.stride < 1) throw config_error("dataset.stride must be >= 1");
    if (cfg.test_stride < 1) throw config_error("dataset.test_stride must be >= 1");
    if (cfg.n_pressure_samples < cfg.window_len) {
        throw config_error("dataset.pressure_samples must cover at least one window");
    }
    if (cfg.conditions.empty()) throw config_error("dataset.conditions is empty");
    if (cfg.seeds.empty()) throw config_error("seeds is empty");
    if (std::set<uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() != cfg.seeds.size()) {
        throw config_error("seeds contains duplicates");
    }
    if (cfg.regimes.empty()) throw config_error("regimes is empty");
    std::set<Regime> seen;
    for (Regime r : cfg.regimes) {
        if (!seen.insert(r).second) {
            throw config_error(std::string("regime ") + regime_name(r) + " selected twice");
        }
        auto it = cfg.training.find(r);
        if (it == cfg.training.end()) {
            throw config_error(std::string("regime ") + regime_name(r) +
                               " selected but has no training entry");
        }
        detail::validate_train_config(it->second);
    }
    if (cfg.out_dir.empty()) throw config_error("out directory is empty");
}

// --------------------------------------------------------------------------
// JSON round trip.
// --------------------------------------------------------------------------

namespace detail {

using ordered_json = nlohmann::ordered_json;

inline void reject_unknown_keys(const ordered_json& j, const std::set<std::string>& known,
                                const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.count(key)) {
            throw config_error("unknown key \"" + key + "\" in " + where);
        }
    }
}

template <typename T>
void maybe_get(const ordered_json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json ds;
    ds["window"] = cfg.window_len;
    ds["stride"] = cfg.stride;
    ds["test_stride"] = cfg.test_stride;
    ds["pressure_samples"] = cfg.n_pressure_samples;
    ds["master_seed"] = cfg.master_seed;
    nlohmann::ordered_json conds = nlohmann::ordered_json::array();
    for (const auto& c : cfg.conditions) {
        nlohmann::ordered_json jc;
        jc["id"] = c.id;
        jc["premix_mm"] = c.premixing_length_mm;
        jc["ffr_lpm"] = c.ffr_lpm;
        jc["afr_lpm"] = c.afr_lpm;
        jc["label"] = c.label == Label::unstable ? "unstable" : "stable";
        jc["split"] = c.is_test ? "test" : "train";
        conds.push_back(jc);
    }
    ds["conditions"] = conds;
    j["dataset"] = ds;
    j["seeds"] = cfg.seeds;
    nlohmann::ordered_json regimes = nlohmann::ordered_json::array();
    for (Regime r : cfg.regimes) regimes.push_back(regime_name(r));
    j["regimes"] = regimes;
    nlohmann::ordered_json training;
    for (const auto& [regime, tc] : cfg.training) {
        nlohmann::ordered_json jt;
        jt["epochs"] = tc.epochs;
        jt["lr"] = tc.lr;
        jt["batch"] = tc.batch_size;
        jt["dropout"] = tc.dropout_rate;
        jt["lambda_emb"] = tc.lambda_emb;
        jt["lambda_rec"] = tc.lambda_rec;
        jt["lambda_cls"] = tc.lambda_cls;
        jt["lambda_feat"] = tc.lambda_feat;
        training[regime_name(regime)] = jt;
    }
    j["training"] = training;
    j["out"] = cfg.out_dir;
    return j;
}

/// Parse a (possibly partial) config document over the defaults.
inline RunConfig run_config_from_json(const nlohmann::ordered_json& j) {
    RunConfig cfg = default_run_config();
    try {
        detail::reject_unknown_keys(j, {"dataset", "seeds", "regimes", "training", "out"},
                                    "config root");
        if (j.contains("dataset")) {
            const auto& ds = j.at("dataset");
            detail::reject_unknown_keys(
                ds, {"window", "stride", "test_stride", "pressure_samples", "master_seed",
                     "conditions"},
                "dataset");
            detail::maybe_get(ds, "window", cfg.window_len);
            detail::maybe_get(ds, "stride", cfg.stride);
            detail::maybe_get(ds, "test_stride", cfg.test_stride);
            detail::maybe_get(ds, "pressure_samples", cfg.n_pressure_samples);
            detail::maybe_get(ds, "master_seed", cfg.master_seed);
            if (ds.contains("conditions")) {
                cfg.conditions.clear();
                for (const auto& jc : ds.at("conditions")) {
                    detail::reject_unknown_keys(
                        jc, {"id", "premix_mm", "ffr_lpm", "afr_lpm", "label", "split"},
                        "condition");
                    ConditionSpec c;
                    c.id = jc.at("id").get<uint32_t>();
                    c.premixing_length_mm = jc.at("premix_mm").get<int>();
                    c.ffr_lpm = jc.at("ffr_lpm").get<int>();
                    c.afr_lpm = jc.at("afr_lpm").get<int>();
                    const std::string label = jc.at("label").get<std::string>();
                    if (label != "stable" && label != "unstable") {
                        throw config_error("condition label must be stable|unstable, got " + label);
                    }
                    c.label = label == "unstable" ? Label::unstable : Label::stable;
                    const std::string split = jc.at("split").get<std::string>();
                    if (split != "train" && split != "test") {
                        throw config_error("condition split must be train|test, got " + split);
                    }
                    c.is_test = split == "test";
                    cfg.conditions.push_back(c);
                }
            }
        }
        detail::maybe_get(j, "seeds", cfg.seeds);
        if (j.contains("regimes")) {
            cfg.regimes.clear();
            for (const auto& name : j.at("regimes")) {
                cfg.regimes.push_back(regime_from_name(name.get<std::string>()));
            }
        }
        if (j.contains("training")) {
            for (const auto& [name, jt] : j.at("training").items()) {
                const Regime regime = regime_from_name(name);
                detail::reject_unknown_keys(jt,
                                            {"epochs", "lr", "batch", "dropout", "lambda_emb",
                                             "lambda_rec", "lambda_cls", "lambda_feat"},
                                            "training." + name);
                TrainConfig& tc = cfg.training[regime];
                tc.regime = regime;
                detail::maybe_get(jt, "epochs", tc.epochs);
                detail::maybe_get(jt, "lr", tc.lr);
                detail::maybe_get(jt, "batch", tc.batch_size);
                detail::maybe_get(jt, "dropout", tc.dropout_rate);
                detail::maybe_get(jt, "lambda_emb", tc.lambda_emb);
                detail::maybe_get(jt, "lambda_rec", tc.lambda_rec);
                detail::maybe_get(jt, "lambda_cls", tc.lambda_cls);
                detail::maybe_get(jt, "lambda_feat", tc.lambda_feat);
            }
        }
        detail::maybe_get(j, "out", cfg.out_dir);
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("malformed config: ") + e.what());
    }
    validate_run_config(cfg);
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    if (!std::filesystem::exists(path)) throw config_error("config file not found: " + path);
    ByteReader r = ByteReader::from_file(path);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(r.buf.begin(), r.buf.end());
    } catch (const nlohmann::json::exception& e) {
        throw config_error(path + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

// --------------------------------------------------------------------------
// Flag overrides: dotted key paths applied on top of a loaded config, e.g.
//   dataset.window=75   training.VS1.epochs=8   seeds=1,2,3   out=/tmp/run
// --------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

template <typename T>
T parse_number(const std::string& text, const std::string& key) {
    try {
        size_t used = 0;
        if constexpr (std::is_floating_point_v<T>) {
            const double v = std::stod(text, &used);
            if (used != text.size()) throw config_error("");
            return static_cast<T>(v);
        } else {
            const long long v = std::stoll(text, &used);
            if (used != text.size()) throw config_error("");
            return static_cast<T>(v);
        }
    } catch (...) {
        throw config_error("override " + key + " expects a number, got \"" + text + "\"");
    }
}

}  // namespace detail

inline void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw config_error("override \"" + assignment + "\" is not of the form key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    const auto path = detail::split(key, '.');

    if (key == "out") {
        cfg.out_dir = value;
    } else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& part : detail::split(value, ',')) {
            cfg.seeds.push_back(detail::parse_number<uint64_t>(part, key));
        }
    } else if (key == "regimes") {
        cfg.regimes.clear();
        for (const auto& part : detail::split(value, ',')) {
            cfg.regimes.push_back(regime_from_name(part));
        }
    } else if (path.size() == 2 && path[0] == "dataset") {
        if (path[1] == "window") {
            cfg.window_len = detail::parse_number<int>(value, key);
        } else if (path[1] == "stride") {
            cfg.stride = detail::parse_number<int>(value, key);
        } else if (path[1] == "test_stride") {
            cfg.test_stride = detail::parse_number<int>(value, key);
        } else if (path[1] == "pressure_samples") {
            cfg.n_pressure_samples = detail::parse_number<int>(value, key);
        } else if (path[1] == "master_seed") {
            cfg.master_seed = detail::parse_number<uint64_t>(value, key);
        } else {
            throw config_error("unknown override key " + key);
        }
    } else if (path.size() == 3 && path[0] == "training") {
        TrainConfig& tc = cfg.training[regime_from_name(path[1])];
        tc.regime = regime_from_name(path[1]);
        if (path[2] == "epochs") {
            tc.epochs = detail::parse_number<int>(value, key);
        } else if (path[2] == "lr") {
            tc.lr = detail::parse_number<double>(value, key);
        } else if (path[2] == "batch") {
            tc.batch_size = detail::parse_number<int>(value, key);
        } else if (path[2] == "dropout") {
            tc.dropout_rate = detail::parse_number<double>(value, key);
        } else if (path[2] == "lambda_emb") {
            tc.lambda_emb = detail::parse_number<double>(value, key);
        } else if (path[2] == "lambda_rec") {
            tc.lambda_rec = detail::parse_number<double>(value, key);
        } else if (path[2] == "lambda_cls") {
            tc.lambda_cls = detail::parse_number<double>(value, key);
        } else if (path[2] == "lambda_feat") {
            tc.lambda_feat = detail::parse_number<double>(value, key);
        } else {
            throw config_error("unknown override key " + key);
        }
    } else {
        throw config_error("unknown override key " + key);
    }
}

// --------------------------------------------------------------------------
// Config identity: canonical byte serialization of every field that affects
// artifact content. The output directory is a location, not an identity, so
// it stays out of the hash.
// --------------------------------------------------------------------------

inline uint64_t config_hash(const RunConfig& cfg) {
    ByteWriter w;
    w.u32(static_cast<uint32_t>(cfg.window_len));
    w.u32(static_cast<uint32_t>(cfg.stride));
    w.u32(static_cast<uint32_t>(cfg.test_stride));
    w.u32(static_cast<uint32_t>(cfg.n_pressure_samples));
    w.u64(cfg.master_seed);
    w.u32(static_cast<uint32_t>(cfg.conditions.size()));
    for (const auto& c : cfg.conditions) {
        w.u32(c.id);
        w.u32(static_cast<uint32_t>(c.premixing_length_mm));
        w.u32(static_cast<uint32_t>(c.ffr_lpm));
        w.u32(static_cast<uint32_t>(c.afr_lpm));
        w.u8(static_cast<uint8_t>((c.label == Label::unstable ? 1 : 0) | (c.is_test ? 2 : 0)));
    }
    w.u32(static_cast<uint32_t>(cfg.seeds.size()));
    for (uint64_t s : cfg.seeds) w.u64(s);
    w.u32(static_cast<uint32_t>(cfg.regimes.size()));
    for (Regime r : cfg.regimes) w.u8(static_cast<uint8_t>(r));
    w.u32(static_cast<uint32_t>(cfg.training.size()));
    for (const auto& [regime, tc] : cfg.training) {
        w.u8(static_cast<uint8_t>(regime));
        w.u32(static_cast<uint32_t>(tc.epochs));
        w.u32(static_cast<uint32_t>(tc.batch_size));
        const auto f64 = [&](double v) {
            uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            w.u64(bits);
        };
        f64(tc.lr);
        f64(tc.dropout_rate);
        f64(tc.lambda_emb);
        f64(tc.lambda_rec);
        f64(tc.lambda_cls);
        f64(tc.lambda_feat);
    }
    return fnv1a64(w.buf.data(), w.buf.size());
}

}  // namespace vsense
