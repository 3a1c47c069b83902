#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "vsense/hash.hpp"
#include "vsense/rng.hpp"
#include "vsense/serialize.hpp"
#include "vsense/spectrum.hpp"
#include "vsense/tensor.hpp"

namespace vsense {

enum class Label : uint8_t { stable = 0, unstable = 1 };

// Operating-condition thresholds and signal constants. The labeling
// thresholds match the rig's documented stability criteria: sharp 130-150 Hz
// oscillations above 500 Pa RMS versus broadband noise below 100 Pa RMS.
namespace signal {
constexpr int pressure_rate_hz = 9000;
constexpr int frame_rate_hz = 3000;
constexpr int rate_ratio = pressure_rate_hz / frame_rate_hz;  // 3 pressure ticks per frame
constexpr int channels = 4;
constexpr int duration_s = 3;
constexpr int samples_per_condition = pressure_rate_hz * duration_s;
constexpr int frame_h = 64;
constexpr int frame_w = 64;
constexpr double unstable_rms_pa = 500.0;
constexpr double stable_rms_pa = 100.0;
constexpr double band_lo_hz = 130.0;
constexpr double band_hi_hz = 150.0;
constexpr double peak_ratio_min = 10.0;
constexpr double harmonic2_scale = 0.25;  // second-harmonic amplitude fraction
constexpr double flap_px = 12.0;          // axial blob travel for unstable flames
constexpr double flap_gain = 0.4;         // intensity modulation depth
constexpr double input_norm_pa = 1000.0;  // fixed scale dividing model-input windows
}  // namespace signal

struct ConditionSpec {
    uint32_t id = 0;
    int premixing_length_mm = 0;  // 90 or 120
    int ffr_lpm = 0;
    int afr_lpm = 0;
    Label label = Label::stable;
    bool is_test = false;
    uint64_t seed = 0;

    std::string name() const {
        return std::string(label == Label::unstable ? "Unstable" : "Stable") + "_" +
               std::to_string(premixing_length_mm) + "_" + std::to_string(ffr_lpm) + "_" +
               std::to_string(afr_lpm);
    }
};

/// The six operating conditions: four for training (two per class), two held
/// out for testing, tagged premix length / fuel flow / air flow.
inline std::vector<ConditionSpec> default_conditions() {
    std::vector<ConditionSpec> c(6);
    c[0] = {0, 120, 60, 600, Label::stable, false, 0};
    c[1] = {1, 90, 45, 450, Label::stable, false, 0};
    c[2] = {2, 120, 45, 900, Label::unstable, false, 0};
    c[3] = {3, 90, 28, 600, Label::unstable, false, 0};
    c[4] = {4, 120, 45, 450, Label::stable, true, 0};
    c[5] = {5, 90, 45, 900, Label::unstable, true, 0};
    return c;
}

struct PressureSeries {
    int sample_rate = signal::pressure_rate_hz;
    Tensor<float> values;  // (channels, n) in Pa, per-channel zero mean
};

/// Drawn per condition, also consumed by the frame renderer so flame motion
/// locks to the pressure fundamental.
struct SynthInfo {
    double f0 = 0;          // fundamental, Hz (unstable only)
    double amp = 0;         // fundamental amplitude A, Pa (unstable only)
    double phase0 = 0;      // channel-0 fundamental phase, radians
    double target_rms = 0;  // per-channel RMS the draw aimed for, Pa
};

/// Limit-cycle surrogate: A sin(2 pi f0 t + phi_c) + 0.25 A sin(4 pi f0 t +
/// phi'_c) per channel, plus optional white noise.
inline Tensor<float> unstable_wave(int n, int sample_rate, double f0, double amp,
                                   const double phase1[signal::channels],
                                   const double phase2[signal::channels], double noise_sigma,
                                   Rng& noise_rng) {
    Tensor<float> out({signal::channels, n});
    for (int c = 0; c < signal::channels; ++c) {
        for (int i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / sample_rate;
            double v = amp * std::sin(2.0 * std::numbers::pi * f0 * t + phase1[c]) +
                       signal::harmonic2_scale * amp *
                           std::sin(4.0 * std::numbers::pi * f0 * t + phase2[c]);
            if (noise_sigma > 0) v += noise_rng.normal(0.0, noise_sigma);
            out.at(c, i) = static_cast<float>(v);
        }
    }
    return out;
}

/// Band-limited (0..cutoff Hz) Gaussian noise scaled to target_rms per
/// channel.
inline Tensor<float> stable_noise(int n, int sample_rate, double cutoff_hz, double target_rms,
                                  Rng& noise_rng) {
    Tensor<float> out({signal::channels, n});
    std::vector<double> white(static_cast<size_t>(n));
    for (int c = 0; c < signal::channels; ++c) {
        for (auto& v : white) v = noise_rng.normal();
        auto filtered = lowpass_fft(white, sample_rate, cutoff_hz);
        const double r = rms(filtered);
        const double scale = r > 0 ? target_rms / r : 0.0;
        for (int i = 0; i < n; ++i)
            out.at(c, i) = static_cast<float>(filtered[static_cast<size_t>(i)] * scale);
    }
    return out;
}

inline void remove_channel_means(Tensor<float>& values) {
    const int C = values.dim(0), n = values.dim(1);
    for (int c = 0; c < C; ++c) {
        double mean = 0;
        for (int i = 0; i < n; ++i) mean += values.at(c, i);
        mean /= n;
        for (int i = 0; i < n; ++i) values.at(c, i) = static_cast<float>(values.at(c, i) - mean);
    }
}

/// Synthesizes one condition's pressure record. All draws come from streams
/// derived from cond.seed, so conditions are independent of generation
/// order. Stream 0 feeds the parameter draws, stream 1 the sample noise.
inline PressureSeries synth_pressure(const ConditionSpec& cond,
                                     int n = signal::samples_per_condition,
                                     SynthInfo* info_out = nullptr) {
    Rng params = Rng::derive(cond.seed, 0);
    Rng noise = Rng::derive(cond.seed, 1);
    PressureSeries s;
    SynthInfo info;
    if (cond.label == Label::unstable) {
        // Margins inside the drawn bands keep the realized RMS within
        // [500, 900] Pa after noise and the spectral peak inside 130-150 Hz
        // after binning.
        info.f0 = params.uniform(131.0, 149.0);
        info.target_rms = params.uniform(510.0, 890.0);
        double phase1[signal::channels], phase2[signal::channels];
        for (double& p : phase1) p = params.uniform(0.0, 2.0 * std::numbers::pi);
        for (double& p : phase2) p = params.uniform(0.0, 2.0 * std::numbers::pi);
        info.phase0 = phase1[0];
        info.amp = info.target_rms * std::sqrt(2.0) /
                   std::sqrt(1.0 + signal::harmonic2_scale * signal::harmonic2_scale);
        s.values = unstable_wave(n, s.sample_rate, info.f0, info.amp, phase1, phase2, 25.0, noise);
    } else {
        info.target_rms = params.uniform(35.0, 85.0);
        s.values = stable_noise(n, s.sample_rate, 500.0, info.target_rms, noise);
    }
    remove_channel_means(s.values);
    if (info_out) *info_out = info;
    return s;
}

/// Gaussian-blob flame surrogate on a dark background. Stable flames jitter
/// mildly around the base pose; unstable flames flap axially by
/// flap_px * sin(phase) with intensity modulated by (1 + 0.4 sin(phase)).
/// The premixing length picks the blob's aspect ratio (90 mm burns wider).
inline Tensor<float> render_frame(double phase, double amplitude, const ConditionSpec& cond,
                                  Rng& rng) {
    if (amplitude < 0) throw parameter_error("render_frame: amplitude must be >= 0");
    const double jx = rng.uniform(-0.5, 0.5);
    const double jy = rng.uniform(-0.5, 0.5);
    const double jp = rng.uniform(-0.02, 0.02);

    const double sigma_x = cond.premixing_length_mm == 90 ? 10.0 : 6.0;
    const double sigma_y = 8.0;
    double cx = 32.0 + jx;
    double cy = 36.0 + jy;
    double peak = 0.7 + jp;
    if (cond.label == Label::unstable && amplitude > 0) {
        cy += signal::flap_px * std::sin(phase);
        peak *= 1.0 + signal::flap_gain * std::sin(phase);
    }

    Tensor<float> img({signal::frame_h, signal::frame_w});
    for (int y = 0; y < signal::frame_h; ++y) {
        for (int x = 0; x < signal::frame_w; ++x) {
            const double dx = (x - cx) / sigma_x;
            const double dy = (y - cy) / sigma_y;
            const double v = peak * std::exp(-0.5 * (dx * dx + dy * dy));
            img.at(y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return img;
}

/// Classifies a pressure record by RMS level and spectral sharpness.
/// The generator never emits the gap between the stable and unstable bands,
/// so landing there means the generator and oracle disagree.
inline Label label_oracle(const PressureSeries& s) {
    require_rank(s.values, 2, "label_oracle series");
    const int C = s.values.dim(0), n = s.values.dim(1);
    if (n < s.sample_rate) throw parameter_error("label_oracle: needs at least 1 s of data");
    double mean_rms = 0;
    for (int c = 0; c < C; ++c) mean_rms += rms(&s.values.at(c, 0), n) / C;
    if (mean_rms < signal::stable_rms_pa) return Label::stable;
    if (mean_rms > signal::unstable_rms_pa) {
        const SpectrumPeak p = dominant_frequency(s.values, s.sample_rate);
        if (p.freq >= signal::band_lo_hz && p.freq <= signal::band_hi_hz &&
            p.ratio > signal::peak_ratio_min) {
            return Label::unstable;
        }
        throw labeling_error("RMS " + std::to_string(mean_rms) +
                             " Pa is in the unstable band but the spectrum peak (" +
                             std::to_string(p.freq) + " Hz, ratio " + std::to_string(p.ratio) +
                             ") is not a sharp instability tone");
    }
    throw labeling_error("RMS " + std::to_string(mean_rms) +
                         " Pa falls in the unpopulated gap between stable (<100) and unstable "
                         "(>500) bands");
}

struct Sample {
    uint32_t condition_id = 0;
    uint32_t frame_index = 0;      // frame k; window ends at pressure index 3k
    Tensor<float> window;          // (channels, W), Pa
    Tensor<float> frame;           // (64, 64), [0,1]
    Label label = Label::stable;
};

struct Dataset {
    uint16_t version = 1;
    uint64_t config_hash = 0;
    uint64_t master_seed = 0;
    int window_len = 0;
    int stride = 0;       // frame-index step between train-split samples
    int test_stride = 0;  // frame-index step for test conditions
    int n_pressure_samples = 0;
    std::vector<ConditionSpec> conditions;
    std::vector<Sample> train, test;

    const ConditionSpec& condition_by_id(uint32_t id) const {
        for (const auto& c : conditions)
            if (c.id == id) return c;
        throw incompatibility_error("unknown condition id " + std::to_string(id));
    }
};

inline uint64_t dataset_config_hash(const std::vector<ConditionSpec>& conditions,
                                    uint64_t master_seed, int window_len, int stride,
                                    int test_stride, int n_pressure_samples) {
    ByteWriter w;
    w.u64(master_seed);
    w.u32(static_cast<uint32_t>(window_len));
    w.u32(static_cast<uint32_t>(stride));
    w.u32(static_cast<uint32_t>(test_stride));
    w.u32(static_cast<uint32_t>(n_pressure_samples));
    w.u32(signal::channels);
    w.u32(signal::pressure_rate_hz);
    w.u32(signal::frame_rate_hz);
    w.u32(signal::frame_h);
    w.u32(signal::frame_w);
    w.u32(static_cast<uint32_t>(conditions.size()));
    for (const auto& c : conditions) {
        w.u32(c.id);
        w.u32(static_cast<uint32_t>(c.premixing_length_mm));
        w.u32(static_cast<uint32_t>(c.ffr_lpm));
        w.u32(static_cast<uint32_t>(c.afr_lpm));
        w.u8(static_cast<uint8_t>((c.label == Label::unstable ? 1 : 0) | (c.is_test ? 2 : 0)));
    }
    return fnv1a64(w.buf.data(), w.buf.size());
}

/// Generates every condition, renders the sampled frames, and packs aligned
/// (window, frame) pairs. Frame k's causal window covers pressure indices
/// [3k - W + 1, 3k]; frames whose window would start before t=0 are dropped.
/// Train and test conditions may sample at different strides (0 = same), so
/// split sizes are tunable independently.
inline Dataset build_dataset(std::vector<ConditionSpec> conditions, int window_len, int stride,
                             uint64_t master_seed,
                             int n_pressure_samples = signal::samples_per_condition,
                             int test_stride = 0) {
    if (window_len < 1) throw parameter_error("build_dataset: window length must be >= 1");
    if (window_len > n_pressure_samples) {
        throw parameter_error("build_dataset: window length " + std::to_string(window_len) +
                              " exceeds series length " + std::to_string(n_pressure_samples));
    }
    if (stride < 1) throw parameter_error("build_dataset: stride must be >= 1");
    if (test_stride == 0) test_stride = stride;
    if (test_stride < 1) throw parameter_error("build_dataset: test stride must be >= 1");
    std::set<std::tuple<int, int, int>> triples;
    std::set<uint32_t> ids;
    for (const auto& c : conditions) {
        if (!triples.insert({c.premixing_length_mm, c.ffr_lpm, c.afr_lpm}).second) {
            throw parameter_error("build_dataset: duplicate condition triple " + c.name());
        }
        if (!ids.insert(c.id).second) {
            throw parameter_error("build_dataset: duplicate condition id " + std::to_string(c.id));
        }
    }

    Dataset ds;
    ds.master_seed = master_seed;
    ds.window_len = window_len;
    ds.stride = stride;
    ds.test_stride = test_stride;
    ds.n_pressure_samples = n_pressure_samples;
    ds.config_hash = dataset_config_hash(conditions, master_seed, window_len, stride, test_stride,
                                         n_pressure_samples);

    const int k_first = (window_len - 1 + signal::rate_ratio - 1) / signal::rate_ratio;
    const int k_last = (n_pressure_samples - 1) / signal::rate_ratio;

    for (auto& cond : conditions) {
        cond.seed = Rng::derive(master_seed, cond.id).state;
        SynthInfo info;
        PressureSeries series = synth_pressure(cond, n_pressure_samples, &info);

        // Generator/oracle consistency gate; the oracle needs a second of
        // data, shorter (test-scale) series skip it.
        if (n_pressure_samples >= series.sample_rate && label_oracle(series) != cond.label) {
            throw labeling_error("condition " + cond.name() +
                                 " generated a signal the oracle labels differently");
        }

        const int step = cond.is_test ? test_stride : stride;
        for (int k = k_first; k <= k_last; k += step) {
            Sample smp;
            smp.condition_id = cond.id;
            smp.frame_index = static_cast<uint32_t>(k);
            smp.label = cond.label;
            smp.window = Tensor<float>({signal::channels, window_len});
            const int start = k * signal::rate_ratio - window_len + 1;
            for (int c = 0; c < signal::channels; ++c)
                for (int i = 0; i < window_len; ++i)
                    smp.window.at(c, i) = series.values.at(c, start + i);
            const double t = static_cast<double>(k) / signal::frame_rate_hz;
            const double phase = 2.0 * std::numbers::pi * info.f0 * t + info.phase0;
            Rng frame_rng = Rng::derive(cond.seed, 2, static_cast<uint64_t>(k));
            smp.frame = render_frame(phase, info.amp, cond, frame_rng);
            (cond.is_test ? ds.test : ds.train).push_back(std::move(smp));
        }
        ds.conditions.push_back(cond);
    }
    return ds;
}

// --------------------------------------------------------------------------
// Dataset file ("VSNS"): header, condition table, then train and test sample
// records, all little-endian.
// --------------------------------------------------------------------------

inline void write_dataset(const Dataset& ds, const std::string& path) {
    ByteWriter w;
    w.magic("VSNS");
    w.u16(ds.version);
    w.u64(ds.config_hash);
    w.u64(ds.master_seed);
    w.u32(static_cast<uint32_t>(ds.conditions.size()));
    w.u32(static_cast<uint32_t>(ds.train.size()));
    w.u32(static_cast<uint32_t>(ds.test.size()));
    w.u32(static_cast<uint32_t>(ds.window_len));
    w.u32(static_cast<uint32_t>(ds.stride));
    w.u32(static_cast<uint32_t>(ds.test_stride));
    w.u32(signal::channels);
    w.u32(signal::frame_h);
    w.u32(signal::frame_w);
    w.u32(signal::pressure_rate_hz);
    w.u32(signal::frame_rate_hz);
    w.u32(static_cast<uint32_t>(ds.n_pressure_samples));
    for (const auto& c : ds.conditions) {
        w.u32(c.id);
        w.u32(static_cast<uint32_t>(c.premixing_length_mm));
        w.u32(static_cast<uint32_t>(c.ffr_lpm));
        w.u32(static_cast<uint32_t>(c.afr_lpm));
        w.u64(c.seed);
        w.u8(static_cast<uint8_t>((c.label == Label::unstable ? 1 : 0) | (c.is_test ? 2 : 0)));
    }
    auto put = [&](const Sample& s) {
        w.u32(s.condition_id);
        w.u32(s.frame_index);
        w.f32s(s.window.data.data(), s.window.data.size());
        w.f32s(s.frame.data.data(), s.frame.data.size());
    };
    for (const auto& s : ds.train) put(s);
    for (const auto& s : ds.test) put(s);
    w.save(path);
}

inline Dataset read_dataset(const std::string& path) {
    ByteReader r = ByteReader::from_file(path);
    r.expect_magic("VSNS", "dataset");
    Dataset ds;
    ds.version = r.u16();
    if (ds.version != 1) {
        throw format_error("dataset version " + std::to_string(ds.version) + " unsupported");
    }
    ds.config_hash = r.u64();
    ds.master_seed = r.u64();
    const uint32_t n_cond = r.u32();
    const uint32_t n_train = r.u32();
    const uint32_t n_test = r.u32();
    ds.window_len = static_cast<int>(r.u32());
    ds.stride = static_cast<int>(r.u32());
    ds.test_stride = static_cast<int>(r.u32());
    const uint32_t channels = r.u32();
    const uint32_t fh = r.u32();
    const uint32_t fw = r.u32();
    const uint32_t prate = r.u32();
    const uint32_t frate = r.u32();
    ds.n_pressure_samples = static_cast<int>(r.u32());
    if (channels != signal::channels || fh != signal::frame_h || fw != signal::frame_w ||
        prate != signal::pressure_rate_hz || frate != signal::frame_rate_hz) {
        throw format_error("dataset geometry differs from this build's fixed rig constants");
    }
    for (uint32_t i = 0; i < n_cond; ++i) {
        ConditionSpec c;
        c.id = r.u32();
        c.premixing_length_mm = static_cast<int>(r.u32());
        c.ffr_lpm = static_cast<int>(r.u32());
        c.afr_lpm = static_cast<int>(r.u32());
        c.seed = r.u64();
        const uint8_t flags = r.u8();
        c.label = (flags & 1) ? Label::unstable : Label::stable;
        c.is_test = (flags & 2) != 0;
        ds.conditions.push_back(c);
    }
    auto get = [&](std::vector<Sample>& out) {
        Sample s;
        s.condition_id = r.u32();
        s.frame_index = r.u32();
        s.label = ds.condition_by_id(s.condition_id).label;
        s.window = Tensor<float>({signal::channels, ds.window_len});
        r.f32s(s.window.data.data(), s.window.data.size());
        s.frame = Tensor<float>({signal::frame_h, signal::frame_w});
        r.f32s(s.frame.data.data(), s.frame.data.size());
        out.push_back(std::move(s));
    };
    for (uint32_t i = 0; i < n_train; ++i) get(ds.train);
    for (uint32_t i = 0; i < n_test; ++i) get(ds.test);
    if (!r.at_end()) {
        throw format_error("dataset has " + std::to_string(r.buf.size() - r.pos) +
                           " unexplained trailing bytes");
    }
    return ds;
}

/// 8-bit binary PGM dump of one frame for visual inspection. A non-empty
/// comment (provenance, config hash) is embedded as a header comment line.
inline void write_pgm(const std::string& path, const Tensor<float>& frame,
                      const std::string& comment = "") {
    require_rank(frame, 2, "write_pgm frame");
    if (comment.find('\n') != std::string::npos) {
        throw parameter_error("write_pgm: comment must be a single line");
    }
    std::string header = "P5\n";
    if (!comment.empty()) header += "# " + comment + "\n";
    header += std::to_string(frame.dim(1)) + " " + std::to_string(frame.dim(0)) + "\n255\n";
    std::vector<unsigned char> bytes(header.begin(), header.end());
    for (const float v : frame.data) {
        const double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
        bytes.push_back(static_cast<unsigned char>(std::lround(clamped * 255.0)));
    }
    ByteWriter::atomic_write(path, bytes.data(), bytes.size());
}

}  // namespace vsense
