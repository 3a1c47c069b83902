#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsense/datagen.hpp"
#include "vsense/hash.hpp"
#include "vsense/layers.hpp"
#include "vsense/lstm.hpp"
#include "vsense/serialize.hpp"
#include "vsense/tensor.hpp"

namespace vsense {

constexpr int embedding_dim = 128;

enum class Role : uint8_t {
    image_encoder = 0,
    image_decoder = 1,
    ts_encoder = 2,
    image_classifier = 3,
    ts_classifier = 4,
};

inline const char* role_name(Role r) {
    switch (r) {
        case Role::image_encoder: return "image_encoder";
        case Role::image_decoder: return "image_decoder";
        case Role::ts_encoder: return "ts_encoder";
        case Role::image_classifier: return "image_classifier";
        case Role::ts_classifier: return "ts_classifier";
    }
    return "unknown";
}

/// sigmoid(logit) > 0.5 means unstable; the tie at exactly 0.5 resolves to
/// stable by documented rule (equivalently: unstable iff logit > 0).
inline Label predict_label(double logit) {
    return logit > 0.0 ? Label::unstable : Label::stable;
}

template <typename T>
inline Tensor<T> reshape(Tensor<T> t, std::vector<int> shape) {
    if (Tensor<T>::numel_of(shape) != t.numel()) {
        std::string want;
        for (int d : shape) want += (want.empty() ? "[" : ",") + std::to_string(d);
        throw dimension_error("reshape: " + t.shape_str() + " has wrong element count for " +
                              want + "]");
    }
    t.shape = std::move(shape);
    return t;
}

namespace detail {
template <typename T>
inline void hash_input(bool trace, std::vector<uint64_t>& sink, const Tensor<T>& x) {
    if (trace) sink.push_back(fnv1a64(x.data.data(), x.data.size() * sizeof(T)));
}
}  // namespace detail

/// Frame (1,64,64) -> 128-d embedding. Three conv+relu+pool stages then a
/// linear projection; the embedding stays unsquashed so it can serve as a
/// regression target with either sign.
template <typename T>
struct ImageEncoder {
    Conv2d<T> c1{1, 16, 3, 1, 1}, c2{16, 32, 3, 1, 1}, c3{32, 64, 3, 1, 1};
    ReLU<T> r1, r2, r3;
    MaxPool2d<T> p1{2}, p2{2}, p3{2};
    Dense<T> fc{64 * 8 * 8, embedding_dim};

    int64_t forward_calls = 0;
    bool trace = false;
    std::vector<uint64_t> input_hashes;

    static constexpr Role role = Role::image_encoder;

    std::string descriptor() const {
        return "image_encoder|conv(1,16,3,1,1)|relu|maxpool2|conv(16,32,3,1,1)|relu|maxpool2|"
               "conv(32,64,3,1,1)|relu|maxpool2|dense(4096,128)";
    }
    uint64_t fingerprint() const { return fnv1a64(descriptor()); }

    void init(Rng& rng) {
        c1.init(rng);
        c2.init(rng);
        c3.init(rng);
        fc.init(rng);
    }
    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        c1.collect(out, "c1");
        c2.collect(out, "c2");
        c3.collect(out, "c3");
        fc.collect(out, "fc");
        return out;
    }
    int64_t param_count() {
        int64_t n = 0;
        for (const auto& p : params()) n += p.tensor->numel();
        return n;
    }

    // x: (B,1,64,64) -> (B,128)
    Tensor<T> forward(const Tensor<T>& x, bool train) {
        require_rank(x, 4, "image_encoder input");
        if (x.dim(1) != 1 || x.dim(2) != signal::frame_h || x.dim(3) != signal::frame_w) {
            throw dimension_error("image_encoder: expected (B,1,64,64), got " + x.shape_str());
        }
        ++forward_calls;
        detail::hash_input(trace, input_hashes, x);
        auto h = p1.forward(r1.forward(c1.forward(x, train), train), train);
        h = p2.forward(r2.forward(c2.forward(h, train), train), train);
        h = p3.forward(r3.forward(c3.forward(h, train), train), train);
        return fc.forward(reshape(std::move(h), {x.dim(0), 64 * 8 * 8}), train);
    }

    Tensor<T> backward(const Tensor<T>& demb) {
        auto d = fc.backward(demb);
        d = reshape(std::move(d), {demb.dim(0), 64, 8, 8});
        d = c3.backward(r3.backward(p3.backward(d)));
        d = c2.backward(r2.backward(p2.backward(d)));
        return c1.backward(r1.backward(p1.backward(d)));
    }
};

/// 128-d embedding -> frame (1,64,64) through three upsample+transpose-conv
/// stages and a final sigmoid. The feature map after the second transpose
/// block (post-relu, shape (16,32,32)) is exposed as `tap` for feature-level
/// distillation.
template <typename T>
struct ImageDecoder {
    Dense<T> fc{embedding_dim, 64 * 8 * 8};
    ReLU<T> r0, r1, r2;
    Upsample2d<T> u1{2}, u2{2}, u3{2};
    ConvTranspose2d<T> ct1{64, 32, 3, 1, 1}, ct2{32, 16, 3, 1, 1}, ct3{16, 1, 3, 1, 1};
    Sigmoid<T> sig;

    Tensor<T> tap;  // valid after forward()

    int64_t forward_calls = 0;
    bool trace = false;
    std::vector<uint64_t> input_hashes, output_hashes;

    static constexpr Role role = Role::image_decoder;

    std::string descriptor() const {
        return "image_decoder|dense(128,4096)|relu|reshape(64,8,8)|upsample2|convT(64,32,3,1,1)|"
               "relu|upsample2|convT(32,16,3,1,1)|relu|tap|upsample2|convT(16,1,3,1,1)|sigmoid";
    }
    uint64_t fingerprint() const { return fnv1a64(descriptor()); }

    void init(Rng& rng) {
        fc.init(rng);
        ct1.init(rng);
        ct2.init(rng);
        ct3.init(rng);
    }
    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        fc.collect(out, "fc");
        ct1.collect(out, "ct1");
        ct2.collect(out, "ct2");
        ct3.collect(out, "ct3");
        return out;
    }
    int64_t param_count() {
        int64_t n = 0;
        for (const auto& p : params()) n += p.tensor->numel();
        return n;
    }

    // emb: (B,128) -> (B,1,64,64), pixels in [0,1]
    Tensor<T> forward(const Tensor<T>& emb, bool train) {
        require_rank(emb, 2, "image_decoder input");
        if (emb.dim(1) != embedding_dim) {
            throw dimension_error("image_decoder: expected (B,128), got " + emb.shape_str());
        }
        ++forward_calls;
        detail::hash_input(trace, input_hashes, emb);
        const int B = emb.dim(0);
        auto h = r0.forward(fc.forward(emb, train), train);
        h = reshape(std::move(h), {B, 64, 8, 8});
        h = r1.forward(ct1.forward(u1.forward(h, train), train), train);
        h = r2.forward(ct2.forward(u2.forward(h, train), train), train);
        tap = h;
        auto out = sig.forward(ct3.forward(u3.forward(h, train), train), train);
        detail::hash_input(trace, output_hashes, out);
        return out;
    }

    /// d_image is the gradient on the sigmoid output; d_tap, when given, is
    /// added at the distillation tap.
    Tensor<T> backward(const Tensor<T>& d_image, const Tensor<T>* d_tap = nullptr) {
        auto d = u3.backward(ct3.backward(sig.backward(d_image)));
        if (d_tap) {
            if (!d.same_shape(*d_tap)) {
                throw dimension_error("image_decoder: tap gradient " + d_tap->shape_str() +
                                      " vs feature map " + d.shape_str());
            }
            for (size_t i = 0; i < d.data.size(); ++i) d.data[i] += d_tap->data[i];
        }
        d = u2.backward(ct2.backward(r2.backward(d)));
        d = u1.backward(ct1.backward(r1.backward(d)));
        d = reshape(std::move(d), {d_image.dim(0), 64 * 8 * 8});
        return fc.backward(r0.backward(d));
    }
};

/// Normalized pressure window (W,4) -> 128-d embedding: two LSTM layers with
/// dropout after each, then a linear projection of the last hidden state.
template <typename T>
struct TsEncoder {
    int window_len;
    double dropout_rate;
    Lstm<T> l1{signal::channels, 64}, l2{64, embedding_dim};
    DropoutLayer<T> d1, d2;
    Dense<T> fc{embedding_dim, embedding_dim};

    int64_t forward_calls = 0;
    bool trace = false;
    std::vector<uint64_t> input_hashes;

    static constexpr Role role = Role::ts_encoder;

    TsEncoder(int window_len_, double dropout_rate_)
        : window_len(window_len_), dropout_rate(dropout_rate_), d1(dropout_rate_),
          d2(dropout_rate_) {
        if (window_len_ < 1) throw parameter_error("ts_encoder: window length must be >= 1");
    }

    std::string descriptor() const {
        return "ts_encoder|W=" + std::to_string(window_len) + "|lstm(4,64)|dropout(" +
               std::to_string(dropout_rate) + ")|lstm(64,128)|last_hidden|dropout(" +
               std::to_string(dropout_rate) + ")|dense(128,128)";
    }
    uint64_t fingerprint() const { return fnv1a64(descriptor()); }

    void init(Rng& rng) {
        l1.init(rng);
        l2.init(rng);
        fc.init(rng);
    }
    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        l1.collect(out, "l1");
        l2.collect(out, "l2");
        fc.collect(out, "fc");
        return out;
    }
    int64_t param_count() {
        int64_t n = 0;
        for (const auto& p : params()) n += p.tensor->numel();
        return n;
    }

    // x: (B, W, 4) normalized -> (B, 128). Training mode draws the dropout
    // masks from *dropout_rng.
    Tensor<T> forward(const Tensor<T>& x, bool train, Rng* dropout_rng = nullptr) {
        require_rank(x, 3, "ts_encoder input");
        if (x.dim(1) != window_len || x.dim(2) != signal::channels) {
            throw dimension_error("ts_encoder: expected (B," + std::to_string(window_len) + "," +
                                  std::to_string(signal::channels) + "), got " + x.shape_str());
        }
        if (train && dropout_rng == nullptr) {
            throw invariant_violation("ts_encoder: training forward needs a dropout stream");
        }
        ++forward_calls;
        detail::hash_input(trace, input_hashes, x);
        const int B = x.dim(0);
        auto h1 = l1.forward(x, train);
        if (train) h1 = d1.forward(h1, true, *dropout_rng);
        auto h2 = l2.forward(h1, train);
        Tensor<T> last({B, embedding_dim});
        for (int n = 0; n < B; ++n)
            for (int j = 0; j < embedding_dim; ++j) last.at(n, j) = h2.at(n, window_len - 1, j);
        if (train) last = d2.forward(last, true, *dropout_rng);
        return fc.forward(last, train);
    }

    void backward(const Tensor<T>& demb) {
        auto dlast = d2.backward(fc.backward(demb));
        const int B = dlast.dim(0);
        Tensor<T> dh2({B, window_len, embedding_dim});
        for (int n = 0; n < B; ++n)
            for (int j = 0; j < embedding_dim; ++j)
                dh2.at(n, window_len - 1, j) = dlast.at(n, j);
        auto dh1 = d1.backward(l2.backward(dh2));
        l1.backward(dh1);
    }
};

/// Frame (1,64,64) -> single stability logit.
template <typename T>
struct ImageClassifier {
    Conv2d<T> c1{1, 16, 3, 1, 1}, c2{16, 32, 3, 1, 1};
    ReLU<T> r1, r2, r3;
    MaxPool2d<T> p1{2}, p2{2};
    Dense<T> fc1{32 * 16 * 16, 64}, fc2{64, 1};

    int64_t forward_calls = 0;
    bool trace = false;
    std::vector<uint64_t> input_hashes;

    static constexpr Role role = Role::image_classifier;

    std::string descriptor() const {
        return "image_classifier|conv(1,16,3,1,1)|relu|maxpool2|conv(16,32,3,1,1)|relu|maxpool2|"
               "dense(8192,64)|relu|dense(64,1)";
    }
    uint64_t fingerprint() const { return fnv1a64(descriptor()); }

    void init(Rng& rng) {
        c1.init(rng);
        c2.init(rng);
        fc1.init(rng);
        fc2.init(rng);
    }
    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        c1.collect(out, "c1");
        c2.collect(out, "c2");
        fc1.collect(out, "fc1");
        fc2.collect(out, "fc2");
        return out;
    }
    int64_t param_count() {
        int64_t n = 0;
        for (const auto& p : params()) n += p.tensor->numel();
        return n;
    }

    // x: (B,1,64,64) -> (B,1) logits
    Tensor<T> forward(const Tensor<T>& x, bool train) {
        require_rank(x, 4, "image_classifier input");
        if (x.dim(1) != 1 || x.dim(2) != signal::frame_h || x.dim(3) != signal::frame_w) {
            throw dimension_error("image_classifier: expected (B,1,64,64), got " + x.shape_str());
        }
        ++forward_calls;
        detail::hash_input(trace, input_hashes, x);
        auto h = p1.forward(r1.forward(c1.forward(x, train), train), train);
        h = p2.forward(r2.forward(c2.forward(h, train), train), train);
        h = r3.forward(fc1.forward(reshape(std::move(h), {x.dim(0), 32 * 16 * 16}), train), train);
        return fc2.forward(h, train);
    }

    Tensor<T> backward(const Tensor<T>& dlogit) {
        auto d = fc1.backward(r3.backward(fc2.backward(dlogit)));
        d = reshape(std::move(d), {dlogit.dim(0), 32, 16, 16});
        d = c2.backward(r2.backward(p2.backward(d)));
        return c1.backward(r1.backward(p1.backward(d)));
    }
};

/// Pure time-series baseline: the ts_encoder trunk plus two dense layers.
template <typename T>
struct TsClassifier {
    TsEncoder<T> trunk;
    ReLU<T> r;
    Dense<T> fc1{embedding_dim, 32}, fc2{32, 1};

    int64_t forward_calls = 0;

    static constexpr Role role = Role::ts_classifier;

    TsClassifier(int window_len, double dropout_rate) : trunk(window_len, dropout_rate) {}

    std::string descriptor() const {
        return "ts_classifier|" + trunk.descriptor() + "|dense(128,32)|relu|dense(32,1)";
    }
    uint64_t fingerprint() const { return fnv1a64(descriptor()); }

    void init(Rng& rng) {
        trunk.init(rng);
        fc1.init(rng);
        fc2.init(rng);
    }
    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out = trunk.params();
        fc1.collect(out, "head1");
        fc2.collect(out, "head2");
        return out;
    }
    int64_t param_count() {
        int64_t n = 0;
        for (const auto& p : params()) n += p.tensor->numel();
        return n;
    }

    // x: (B, W, 4) normalized -> (B, 1) logits
    Tensor<T> forward(const Tensor<T>& x, bool train, Rng* dropout_rng = nullptr) {
        ++forward_calls;
        auto emb = trunk.forward(x, train, dropout_rng);
        return fc2.forward(r.forward(fc1.forward(emb, train), train), train);
    }

    void backward(const Tensor<T>& dlogit) {
        trunk.backward(fc1.backward(r.backward(fc2.backward(dlogit))));
    }
};

/// FNV digest of every parameter tensor in declaration order; the
/// frozen-model contract compares these before and after training.
template <typename M>
uint64_t param_hash(M& model) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (const auto& p : model.params()) {
        h = fnv1a64(p.tensor->data.data(), p.tensor->data.size() * sizeof(p.tensor->data[0]), h);
    }
    return h;
}

// --------------------------------------------------------------------------
// Model file ("VSNM"): role byte and architecture fingerprint up front so a
// wrong-role or wrong-architecture load fails before any parameter is read.
// --------------------------------------------------------------------------

struct ModelFileInfo {
    uint64_t config_hash = 0;
    uint64_t seed = 0;
};

template <typename M>
void save_model(M& model, const std::string& path, uint64_t config_hash, uint64_t seed) {
    ByteWriter w;
    w.magic("VSNM");
    w.u16(1);
    w.u8(static_cast<uint8_t>(M::role));
    w.u64(model.fingerprint());
    w.u64(config_hash);
    w.u64(seed);
    auto ps = model.params();
    int64_t n = 0;
    for (const auto& p : ps) n += p.tensor->numel();
    w.u64(static_cast<uint64_t>(n));
    for (const auto& p : ps)
        for (const auto& v : p.tensor->data) w.f32(static_cast<float>(v));
    w.save(path);
}

template <typename M>
ModelFileInfo load_model(M& model, const std::string& path) {
    ByteReader r = ByteReader::from_file(path);
    r.expect_magic("VSNM", "model");
    const uint16_t version = r.u16();
    if (version != 1) throw format_error("model version " + std::to_string(version) + " unsupported");
    const uint8_t role = r.u8();
    if (role != static_cast<uint8_t>(M::role)) {
        throw incompatibility_error(std::string("model file holds role ") +
                                    role_name(static_cast<Role>(role)) + ", expected " +
                                    role_name(M::role));
    }
    const uint64_t fp = r.u64();
    if (fp != model.fingerprint()) {
        throw incompatibility_error("model fingerprint " + hex64(fp) +
                                    " does not match this architecture's " +
                                    hex64(model.fingerprint()));
    }
    ModelFileInfo info;
    info.config_hash = r.u64();
    info.seed = r.u64();
    const uint64_t n = r.u64();
    auto ps = model.params();
    int64_t have = 0;
    for (const auto& p : ps) have += p.tensor->numel();
    if (static_cast<uint64_t>(have) != n) {
        throw format_error("model file declares " + std::to_string(n) + " parameters, expected " +
                           std::to_string(have));
    }
    for (const auto& p : ps)
        for (auto& v : p.tensor->data) v = r.f32();
    if (!r.at_end()) throw format_error("model file has trailing bytes");
    return info;
}

}  // namespace vsense
