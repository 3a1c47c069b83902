#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "vsense/rng.hpp"
#include "vsense/tensor.hpp"

namespace vsense {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using MapCM = Eigen::Map<const MatRM<T>>;

/// Named handle to a trainable tensor; the tensor's grad buffer is the
/// gradient accumulator for the optimizer.
template <typename T>
struct ParamRef {
    Tensor<T>* tensor;
    std::string name;
};

/// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)]; applied to weights
/// and biases alike, with fan_in = the layer's per-output input count.
template <typename T>
inline void init_uniform(Tensor<T>& t, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

// ---------------------------------------------------------------------------
// Cross-correlation kernels shared by conv2d and conv_transpose2d.
// Geometry: a "small" grid (Ho,Wo) reads/writes a "big" grid (H,W) through a
// k x k window at stride s with zero padding p, Ho = (H + 2p - k)/s + 1.
// ---------------------------------------------------------------------------

namespace detail {

inline void check_conv_geometry(int H, int W, int k, int stride, int padding, const char* what) {
    if (k <= 0 || k % 2 == 0) {
        throw dimension_error(std::string(what) + ": kernel size " + std::to_string(k) +
                              " must be odd and positive");
    }
    if (stride < 1) throw parameter_error(std::string(what) + ": stride must be >= 1");
    if (padding < 0) throw parameter_error(std::string(what) + ": padding must be >= 0");
    if ((H + 2 * padding - k) % stride != 0 || H + 2 * padding < k) {
        throw dimension_error(std::string(what) + ": height " + std::to_string(H) +
                              " incompatible with kernel " + std::to_string(k) + ", stride " +
                              std::to_string(stride) + ", padding " + std::to_string(padding));
    }
    if ((W + 2 * padding - k) % stride != 0 || W + 2 * padding < k) {
        throw dimension_error(std::string(what) + ": width " + std::to_string(W) +
                              " incompatible with kernel " + std::to_string(k) + ", stride " +
                              std::to_string(stride) + ", padding " + std::to_string(padding));
    }
}

/// Gather the big grid (Ci,H,W) into a (Ci*k*k) x (Ho*Wo) patch matrix.
template <typename T>
void im2col(const T* x, int Ci, int H, int W, int k, int stride, int padding, int Ho, int Wo,
            T* cols) {
    const int64_t patch = static_cast<int64_t>(Ho) * Wo;
    for (int ci = 0; ci < Ci; ++ci) {
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw) {
                T* dst = cols + ((static_cast<int64_t>(ci) * k + kh) * k + kw) * patch;
                for (int ho = 0; ho < Ho; ++ho) {
                    const int h = ho * stride - padding + kh;
                    const bool row_ok = (h >= 0 && h < H);
                    const T* src = x + (static_cast<int64_t>(ci) * H + h) * W;
                    for (int wo = 0; wo < Wo; ++wo) {
                        const int w = wo * stride - padding + kw;
                        dst[static_cast<int64_t>(ho) * Wo + wo] =
                            (row_ok && w >= 0 && w < W) ? src[w] : T(0);
                    }
                }
            }
        }
    }
}

/// Scatter-add a (Ci*k*k) x (Ho*Wo) patch matrix back onto the big grid.
template <typename T>
void col2im_add(const T* cols, int Ci, int H, int W, int k, int stride, int padding, int Ho,
                int Wo, T* x) {
    const int64_t patch = static_cast<int64_t>(Ho) * Wo;
    for (int ci = 0; ci < Ci; ++ci) {
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw) {
                const T* src = cols + ((static_cast<int64_t>(ci) * k + kh) * k + kw) * patch;
                for (int ho = 0; ho < Ho; ++ho) {
                    const int h = ho * stride - padding + kh;
                    if (h < 0 || h >= H) continue;
                    T* dst = x + (static_cast<int64_t>(ci) * H + h) * W;
                    for (int wo = 0; wo < Wo; ++wo) {
                        const int w = wo * stride - padding + kw;
                        if (w >= 0 && w < W) dst[w] += src[static_cast<int64_t>(ho) * Wo + wo];
                    }
                }
            }
        }
    }
}

/// out(Co,Ho,Wo) = correlate(x(Ci,H,W), w(Co,Ci,k,k)); out is overwritten.
template <typename T>
void correlate_forward(const T* x, const T* w, T* out, int Ci, int H, int W, int Co, int k,
                       int stride, int padding, int Ho, int Wo) {
    const int64_t kk = static_cast<int64_t>(Ci) * k * k;
    const int64_t patch = static_cast<int64_t>(Ho) * Wo;
    std::vector<T> cols(static_cast<size_t>(kk * patch));
    im2col(x, Ci, H, W, k, stride, padding, Ho, Wo, cols.data());
    MapCM<T> wm(w, Co, kk);
    MapCM<T> cm(cols.data(), kk, patch);
    MapM<T> om(out, Co, patch);
    om.noalias() = wm * cm;
}

/// dx(Ci,H,W) += adjoint of correlate_forward applied to dy(Co,Ho,Wo).
template <typename T>
void correlate_input_grad_add(const T* dy, const T* w, T* dx, int Ci, int H, int W, int Co, int k,
                              int stride, int padding, int Ho, int Wo) {
    const int64_t kk = static_cast<int64_t>(Ci) * k * k;
    const int64_t patch = static_cast<int64_t>(Ho) * Wo;
    std::vector<T> cols(static_cast<size_t>(kk * patch));
    MapCM<T> wm(w, Co, kk);
    MapCM<T> dym(dy, Co, patch);
    MapM<T> cm(cols.data(), kk, patch);
    cm.noalias() = wm.transpose() * dym;
    col2im_add(cols.data(), Ci, H, W, k, stride, padding, Ho, Wo, dx);
}

/// dw(Co,Ci,k,k) += dy(Co,Ho,Wo) correlated against x(Ci,H,W).
template <typename T>
void correlate_weight_grad_add(const T* x, const T* dy, T* dw, int Ci, int H, int W, int Co, int k,
                               int stride, int padding, int Ho, int Wo) {
    const int64_t kk = static_cast<int64_t>(Ci) * k * k;
    const int64_t patch = static_cast<int64_t>(Ho) * Wo;
    std::vector<T> cols(static_cast<size_t>(kk * patch));
    im2col(x, Ci, H, W, k, stride, padding, Ho, Wo, cols.data());
    MapCM<T> dym(dy, Co, patch);
    MapCM<T> cm(cols.data(), kk, patch);
    MapM<T> dwm(dw, Co, kk);
    dwm.noalias() += dym * cm.transpose();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Free-function forms on single samples.
// ---------------------------------------------------------------------------

/// conv2d on one sample: x (Ci,H,W), kernels (Co,Ci,k,k), bias (Co).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias, int stride,
                 int padding) {
    require_rank(x, 3, "conv2d input");
    require_rank(kernels, 4, "conv2d kernels");
    require_finite(x, "conv2d input");
    const int Ci = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int Co = kernels.dim(0), k = kernels.dim(2);
    if (kernels.dim(1) != Ci) {
        throw dimension_error("conv2d: kernel channel axis " + std::to_string(kernels.dim(1)) +
                              " != input channel axis " + std::to_string(Ci));
    }
    if (kernels.dim(3) != k) throw dimension_error("conv2d: kernels must be square");
    require_shape(bias, {Co}, "conv2d bias");
    detail::check_conv_geometry(H, W, k, stride, padding, "conv2d");
    const int Ho = (H + 2 * padding - k) / stride + 1;
    const int Wo = (W + 2 * padding - k) / stride + 1;
    Tensor<T> out({Co, Ho, Wo});
    detail::correlate_forward(x.data.data(), kernels.data.data(), out.data.data(), Ci, H, W, Co, k,
                              stride, padding, Ho, Wo);
    for (int co = 0; co < Co; ++co) {
        T* p = out.data.data() + static_cast<int64_t>(co) * Ho * Wo;
        const T b = bias.data[static_cast<size_t>(co)];
        for (int64_t i = 0; i < static_cast<int64_t>(Ho) * Wo; ++i) p[i] += b;
    }
    return out;
}

/// conv_transpose2d on one sample: x (Ci,H,W), kernels (Ci,Co,k,k), bias (Co).
/// The forward pass is the adjoint of conv2d for the same (stride, padding),
/// so output height is (H-1)*stride + k - 2*padding.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias,
                           int stride, int padding) {
    require_rank(x, 3, "conv_transpose2d input");
    require_rank(kernels, 4, "conv_transpose2d kernels");
    require_finite(x, "conv_transpose2d input");
    const int Ci = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int Co = kernels.dim(1), k = kernels.dim(2);
    if (kernels.dim(0) != Ci) {
        throw dimension_error("conv_transpose2d: kernel input axis " +
                              std::to_string(kernels.dim(0)) + " != input channel axis " +
                              std::to_string(Ci));
    }
    if (kernels.dim(3) != k) throw dimension_error("conv_transpose2d: kernels must be square");
    require_shape(bias, {Co}, "conv_transpose2d bias");
    if (k <= 0 || k % 2 == 0) throw dimension_error("conv_transpose2d: kernel size must be odd");
    if (stride < 1) throw parameter_error("conv_transpose2d: stride must be >= 1");
    if (padding < 0) throw parameter_error("conv_transpose2d: padding must be >= 0");
    const int Ho = (H - 1) * stride + k - 2 * padding;
    const int Wo = (W - 1) * stride + k - 2 * padding;
    if (Ho <= 0 || Wo <= 0) {
        throw dimension_error("conv_transpose2d: output " + std::to_string(Ho) + "x" +
                              std::to_string(Wo) + " is empty");
    }
    Tensor<T> out({Co, Ho, Wo});
    for (int co = 0; co < Co; ++co) {
        T* p = out.data.data() + static_cast<int64_t>(co) * Ho * Wo;
        const T b = bias.data[static_cast<size_t>(co)];
        for (int64_t i = 0; i < static_cast<int64_t>(Ho) * Wo; ++i) p[i] = b;
    }
    detail::correlate_input_grad_add(x.data.data(), kernels.data.data(), out.data.data(), Co, Ho,
                                     Wo, Ci, k, stride, padding, H, W);
    return out;
}

/// Max pooling with window x window non-overlapping cells. Returns the pooled
/// map and the flat argmax index per cell (first maximal element in row-major
/// order, which is the documented tie-break for the backward routing).
template <typename T>
std::pair<Tensor<T>, std::vector<int>> maxpool2d(const Tensor<T>& x, int window) {
    require_rank(x, 3, "maxpool2d input");
    require_finite(x, "maxpool2d input");
    if (window < 1) throw parameter_error("maxpool2d: window must be >= 1");
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (H % window != 0) {
        throw dimension_error("maxpool2d: height " + std::to_string(H) + " not divisible by " +
                              std::to_string(window));
    }
    if (W % window != 0) {
        throw dimension_error("maxpool2d: width " + std::to_string(W) + " not divisible by " +
                              std::to_string(window));
    }
    const int Ho = H / window, Wo = W / window;
    Tensor<T> out({C, Ho, Wo});
    std::vector<int> argmax(static_cast<size_t>(C) * Ho * Wo);
    for (int c = 0; c < C; ++c) {
        const T* xc = x.data.data() + static_cast<int64_t>(c) * H * W;
        for (int ho = 0; ho < Ho; ++ho) {
            for (int wo = 0; wo < Wo; ++wo) {
                int best = (ho * window) * W + wo * window;
                T best_v = xc[best];
                for (int dh = 0; dh < window; ++dh) {
                    for (int dw = 0; dw < window; ++dw) {
                        const int idx = (ho * window + dh) * W + wo * window + dw;
                        if (xc[idx] > best_v) {
                            best_v = xc[idx];
                            best = idx;
                        }
                    }
                }
                out.at(c, ho, wo) = best_v;
                argmax[(static_cast<size_t>(c) * Ho + ho) * Wo + wo] = best;
            }
        }
    }
    return {std::move(out), std::move(argmax)};
}

/// Nearest-neighbour upsampling by an integer factor.
template <typename T>
Tensor<T> upsample2d_nearest(const Tensor<T>& x, int factor) {
    require_rank(x, 3, "upsample2d input");
    if (factor < 1) throw parameter_error("upsample2d: factor must be >= 1");
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    Tensor<T> out({C, H * factor, W * factor});
    for (int c = 0; c < C; ++c) {
        for (int h = 0; h < H * factor; ++h) {
            const T* src = &x.at(c, h / factor, 0);
            T* dst = &out.at(c, h, 0);
            for (int w = 0; w < W * factor; ++w) dst[w] = src[w / factor];
        }
    }
    return out;
}

/// Affine map W*x + b on a single vector x (n), weights (m,n), bias (m).
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias) {
    require_rank(x, 1, "dense input");
    require_rank(weights, 2, "dense weights");
    require_finite(x, "dense input");
    const int m = weights.dim(0), n = weights.dim(1);
    if (x.dim(0) != n) {
        throw dimension_error("dense: input axis " + std::to_string(x.dim(0)) +
                              " != weight column axis " + std::to_string(n));
    }
    require_shape(bias, {m}, "dense bias");
    Tensor<T> out({m});
    MapCM<T> wm(weights.data.data(), m, n);
    Eigen::Map<const Eigen::Vector<T, Eigen::Dynamic>> xv(x.data.data(), n);
    Eigen::Map<const Eigen::Vector<T, Eigen::Dynamic>> bv(bias.data.data(), m);
    Eigen::Map<Eigen::Vector<T, Eigen::Dynamic>> ov(out.data.data(), m);
    ov.noalias() = wm * xv + bv;
    return out;
}

// Elementwise activations with explicit derivative helpers.
template <typename T>
inline T sigmoid_scalar(T v) {
    return T(1) / (T(1) + std::exp(-v));
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& v : y.data) v = v > T(0) ? v : T(0);
    return y;
}
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& v : y.data) v = sigmoid_scalar(v);
    return y;
}
template <typename T>
Tensor<T> tanh_act(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& v : y.data) v = std::tanh(v);
    return y;
}

enum class Mode { train, eval };

/// Inverted dropout: in train mode each element survives with probability
/// 1-rate and is scaled by 1/(1-rate); eval mode is the identity.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw parameter_error("dropout: rate " + std::to_string(rate) + " outside [0,1)");
    }
    if (mode == Mode::eval || rate == 0.0) return x;
    Tensor<T> y = x;
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (auto& v : y.data) v = (rng.next_double() >= rate) ? v * scale : T(0);
    return y;
}

// ---------------------------------------------------------------------------
// Stateful layer objects used to compose models. All operate on batched
// tensors with a leading batch axis and cache what the backward pass needs.
// backward() returns the input gradient and accumulates parameter gradients
// into the params' grad buffers.
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2d {
    int ci, co, k, stride, padding;
    Tensor<T> w, b;

    Tensor<T> cached_x;

    Conv2d(int ci_, int co_, int k_, int stride_, int padding_)
        : ci(ci_), co(co_), k(k_), stride(stride_), padding(padding_),
          w({co_, ci_, k_, k_}), b({co_}) {
        w.alloc_grad();
        b.alloc_grad();
    }

    void init(Rng& rng) {
        init_uniform(w, ci * k * k, rng);
        init_uniform(b, ci * k * k, rng);
    }
    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({&w, prefix + ".w"});
        out.push_back({&b, prefix + ".b"});
    }

    // x: (B, Ci, H, W)
    Tensor<T> forward(const Tensor<T>& x, bool train) {
        require_rank(x, 4, "Conv2d input");
        require_finite(x, "Conv2d input");
        const int B = x.dim(0), H = x.dim(2), W = x.dim(3);
        if (x.dim(1) != ci) {
            throw dimension_error("Conv2d: input channel axis " + std::to_string(x.dim(1)) +
                                  " != " + std::to_string(ci));
        }
        detail::check_conv_geometry(H, W, k, stride, padding, "Conv2d");
        const int Ho = (H + 2 * padding - k) / stride + 1;
        const int Wo = (W + 2 * padding - k) / stride + 1;
        Tensor<T> out({B, co, Ho, Wo});
        const int64_t xs = static_cast<int64_t>(ci) * H * W;
        const int64_t os = static_cast<int64_t>(co) * Ho * Wo;
        for (int n = 0; n < B; ++n) {
            detail::correlate_forward(x.data.data() + n * xs, w.data.data(),
                                      out.data.data() + n * os, ci, H, W, co, k, stride, padding,
                                      Ho, Wo);
        }
        for (int n = 0; n < B; ++n) {
            for (int c = 0; c < co; ++c) {
                T* p = out.data.data() + n * os + static_cast<int64_t>(c) * Ho * Wo;
                const T bb = b.data[static_cast<size_t>(c)];
                for (int64_t i = 0; i < static_cast<int64_t>(Ho) * Wo; ++i) p[i] += bb;
            }
        }
        if (train) cached_x = x;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const Tensor<T>& x = cached_x;
        const int B = x.dim(0), H = x.dim(2), W = x.dim(3);
        const int Ho = dy.dim(2), Wo = dy.dim(3);
        Tensor<T> dx(x.shape);
        const int64_t xs = static_cast<int64_t>(ci) * H * W;
        const int64_t os = static_cast<int64_t>(co) * Ho * Wo;
        for (int n = 0; n < B; ++n) {
            detail::correlate_input_grad_add(dy.data.data() + n * os, w.data.data(),
                                             dx.data.data() + n * xs, ci, H, W, co, k, stride,
                                             padding, Ho, Wo);
            detail::correlate_weight_grad_add(x.data.data() + n * xs, dy.data.data() + n * os,
                                              w.grad.data(), ci, H, W, co, k, stride, padding, Ho,
                                              Wo);
            for (int c = 0; c < co; ++c) {
                const T* p = dy.data.data() + n * os + static_cast<int64_t>(c) * Ho * Wo;
                T acc = T(0);
                for (int64_t i = 0; i < static_cast<int64_t>(Ho) * Wo; ++i) acc += p[i];
                b.grad[static_cast<size_t>(c)] += acc;
            }
        }
        return dx;
    }
};

template <typename T>
struct ConvTranspose2d {
    int ci, co, k, stride, padding;
    Tensor<T> w, b;  // w: (Ci, Co, k, k)

    Tensor<T> cached_x;

    ConvTranspose2d(int ci_, int co_, int k_, int stride_, int padding_)
        : ci(ci_), co(co_), k(k_), stride(stride_), padding(padding_),
          w({ci_, co_, k_, k_}), b({co_}) {
        w.alloc_grad();
        b.alloc_grad();
    }

    void init(Rng& rng) {
        init_uniform(w, ci * k * k, rng);
        init_uniform(b, ci * k * k, rng);
    }
    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({&w, prefix + ".w"});
        out.push_back({&b, prefix + ".b"});
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        require_rank(x, 4, "ConvTranspose2d input");
        require_finite(x, "ConvTranspose2d input");
        const int B = x.dim(0), H = x.dim(2), W = x.dim(3);
        if (x.dim(1) != ci) {
            throw dimension_error("ConvTranspose2d: input channel axis " +
                                  std::to_string(x.dim(1)) + " != " + std::to_string(ci));
        }
        const int Ho = (H - 1) * stride + k - 2 * padding;
        const int Wo = (W - 1) * stride + k - 2 * padding;
        Tensor<T> out({B, co, Ho, Wo});
        const int64_t xs = static_cast<int64_t>(ci) * H * W;
        const int64_t os = static_cast<int64_t>(co) * Ho * Wo;
        for (int n = 0; n < B; ++n) {
            T* po = out.data.data() + n * os;
            for (int c = 0; c < co; ++c) {
                const T bb = b.data[static_cast<size_t>(c)];
                for (int64_t i = 0; i < static_cast<int64_t>(Ho) * Wo; ++i)
                    po[static_cast<int64_t>(c) * Ho * Wo + i] = bb;
            }
            detail::correlate_input_grad_add(x.data.data() + n * xs, w.data.data(), po, co, Ho, Wo,
                                             ci, k, stride, padding, H, W);
        }
        if (train) cached_x = x;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const Tensor<T>& x = cached_x;
        const int B = x.dim(0), H = x.dim(2), W = x.dim(3);
        const int Ho = dy.dim(2), Wo = dy.dim(3);
        Tensor<T> dx(x.shape);
        const int64_t xs = static_cast<int64_t>(ci) * H * W;
        const int64_t os = static_cast<int64_t>(co) * Ho * Wo;
        for (int n = 0; n < B; ++n) {
            // Adjoint of the scatter is a plain correlation of dy.
            detail::correlate_forward(dy.data.data() + n * os, w.data.data(),
                                      dx.data.data() + n * xs, co, Ho, Wo, ci, k, stride, padding,
                                      H, W);
            detail::correlate_weight_grad_add(dy.data.data() + n * os, x.data.data() + n * xs,
                                              w.grad.data(), co, Ho, Wo, ci, k, stride, padding, H,
                                              W);
            for (int c = 0; c < co; ++c) {
                const T* p = dy.data.data() + n * os + static_cast<int64_t>(c) * Ho * Wo;
                T acc = T(0);
                for (int64_t i = 0; i < static_cast<int64_t>(Ho) * Wo; ++i) acc += p[i];
                b.grad[static_cast<size_t>(c)] += acc;
            }
        }
        return dx;
    }
};

template <typename T>
struct MaxPool2d {
    int window;
    std::vector<int> cached_argmax;
    std::vector<int> cached_in_shape;

    explicit MaxPool2d(int window_) : window(window_) {}

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        require_rank(x, 4, "MaxPool2d input");
        const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
        if (H % window != 0 || W % window != 0) {
            throw dimension_error("MaxPool2d: input " + x.shape_str() + " not divisible by " +
                                  std::to_string(window));
        }
        const int Ho = H / window, Wo = W / window;
        Tensor<T> out({B, C, Ho, Wo});
        std::vector<int> am(static_cast<size_t>(B) * C * Ho * Wo);
        for (int n = 0; n < B; ++n) {
            for (int c = 0; c < C; ++c) {
                const T* xc = &x.at(n, c, 0, 0);
                for (int ho = 0; ho < Ho; ++ho) {
                    for (int wo = 0; wo < Wo; ++wo) {
                        int best = (ho * window) * W + wo * window;
                        T best_v = xc[best];
                        for (int dh = 0; dh < window; ++dh) {
                            for (int dw = 0; dw < window; ++dw) {
                                const int idx = (ho * window + dh) * W + wo * window + dw;
                                if (xc[idx] > best_v) {
                                    best_v = xc[idx];
                                    best = idx;
                                }
                            }
                        }
                        out.at(n, c, ho, wo) = best_v;
                        am[((static_cast<size_t>(n) * C + c) * Ho + ho) * Wo + wo] = best;
                    }
                }
            }
        }
        if (train) {
            cached_argmax = std::move(am);
            cached_in_shape = x.shape;
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(cached_in_shape);
        const int B = dy.dim(0), C = dy.dim(1), Ho = dy.dim(2), Wo = dy.dim(3);
        const int64_t plane = static_cast<int64_t>(cached_in_shape[2]) * cached_in_shape[3];
        for (int n = 0; n < B; ++n) {
            for (int c = 0; c < C; ++c) {
                T* dxc = dx.data.data() + (static_cast<int64_t>(n) * C + c) * plane;
                for (int i = 0; i < Ho * Wo; ++i) {
                    const int64_t cell = (static_cast<int64_t>(n) * C + c) * Ho * Wo + i;
                    dxc[cached_argmax[static_cast<size_t>(cell)]] += dy.data[static_cast<size_t>(cell)];
                }
            }
        }
        return dx;
    }
};

template <typename T>
struct Upsample2d {
    int factor;
    std::vector<int> cached_in_shape;

    explicit Upsample2d(int factor_) : factor(factor_) {
        if (factor_ < 1) throw parameter_error("Upsample2d: factor must be >= 1");
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        require_rank(x, 4, "Upsample2d input");
        const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
        Tensor<T> out({B, C, H * factor, W * factor});
        for (int n = 0; n < B; ++n) {
            for (int c = 0; c < C; ++c) {
                for (int h = 0; h < H * factor; ++h) {
                    const T* src = &x.at(n, c, h / factor, 0);
                    T* dst = &out.at(n, c, h, 0);
                    for (int w = 0; w < W * factor; ++w) dst[w] = src[w / factor];
                }
            }
        }
        if (train) cached_in_shape = x.shape;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(cached_in_shape);
        const int B = cached_in_shape[0], C = cached_in_shape[1];
        const int H = cached_in_shape[2], W = cached_in_shape[3];
        for (int n = 0; n < B; ++n) {
            for (int c = 0; c < C; ++c) {
                for (int h = 0; h < H * factor; ++h) {
                    const T* src = &dy.at(n, c, h, 0);
                    T* dst = &dx.at(n, c, h / factor, 0);
                    for (int w = 0; w < W * factor; ++w) dst[w / factor] += src[w];
                }
            }
        }
        return dx;
    }
};

template <typename T>
struct Dense {
    int in, out;
    Tensor<T> w, b;  // w: (out, in)
    Tensor<T> cached_x;

    Dense(int in_, int out_) : in(in_), out(out_), w({out_, in_}), b({out_}) {
        w.alloc_grad();
        b.alloc_grad();
    }

    void init(Rng& rng) {
        init_uniform(w, in, rng);
        init_uniform(b, in, rng);
    }
    void collect(std::vector<ParamRef<T>>& o, const std::string& prefix) {
        o.push_back({&w, prefix + ".w"});
        o.push_back({&b, prefix + ".b"});
    }

    // x: (B, in) -> (B, out)
    Tensor<T> forward(const Tensor<T>& x, bool train) {
        require_rank(x, 2, "Dense input");
        require_finite(x, "Dense input");
        if (x.dim(1) != in) {
            throw dimension_error("Dense: input axis " + std::to_string(x.dim(1)) + " != " +
                                  std::to_string(in));
        }
        const int B = x.dim(0);
        Tensor<T> y({B, out});
        MapCM<T> xm(x.data.data(), B, in);
        MapCM<T> wm(w.data.data(), out, in);
        MapM<T> ym(y.data.data(), B, out);
        ym.noalias() = xm * wm.transpose();
        for (int n = 0; n < B; ++n)
            for (int j = 0; j < out; ++j) y.at(n, j) += b.data[static_cast<size_t>(j)];
        if (train) cached_x = x;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int B = cached_x.dim(0);
        Tensor<T> dx({B, in});
        MapCM<T> dym(dy.data.data(), B, out);
        MapCM<T> xm(cached_x.data.data(), B, in);
        MapCM<T> wm(w.data.data(), out, in);
        MapM<T> dxm(dx.data.data(), B, in);
        MapM<T> dwm(w.grad.data(), out, in);
        dxm.noalias() = dym * wm;
        dwm.noalias() += dym.transpose() * xm;
        for (int n = 0; n < B; ++n)
            for (int j = 0; j < out; ++j) b.grad[static_cast<size_t>(j)] += dy.at(n, j);
        return dx;
    }
};

template <typename T>
struct ReLU {
    Tensor<T> cached_x;
    Tensor<T> forward(const Tensor<T>& x, bool train) {
        Tensor<T> y = x;
        for (auto& v : y.data) v = v > T(0) ? v : T(0);
        if (train) cached_x = x;
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (size_t i = 0; i < dx.data.size(); ++i)
            if (cached_x.data[i] <= T(0)) dx.data[i] = T(0);
        return dx;
    }
};

template <typename T>
struct Sigmoid {
    Tensor<T> cached_y;
    Tensor<T> forward(const Tensor<T>& x, bool train) {
        Tensor<T> y = x;
        for (auto& v : y.data) v = sigmoid_scalar(v);
        if (train) cached_y = y;
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (size_t i = 0; i < dx.data.size(); ++i) {
            const T y = cached_y.data[i];
            dx.data[i] *= y * (T(1) - y);
        }
        return dx;
    }
};

template <typename T>
struct DropoutLayer {
    double rate;
    std::vector<unsigned char> cached_mask;

    explicit DropoutLayer(double rate_) : rate(rate_) {
        if (rate_ < 0.0 || rate_ >= 1.0) {
            throw parameter_error("dropout rate " + std::to_string(rate_) + " outside [0,1)");
        }
    }

    Tensor<T> forward(const Tensor<T>& x, bool train, Rng& rng) {
        if (!train || rate == 0.0) {
            cached_mask.clear();
            return x;
        }
        Tensor<T> y = x;
        cached_mask.resize(y.data.size());
        const T scale = static_cast<T>(1.0 / (1.0 - rate));
        for (size_t i = 0; i < y.data.size(); ++i) {
            const bool keep = rng.next_double() >= rate;
            cached_mask[i] = keep ? 1 : 0;
            y.data[i] = keep ? y.data[i] * scale : T(0);
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        if (cached_mask.empty()) return dy;
        Tensor<T> dx = dy;
        const T scale = static_cast<T>(1.0 / (1.0 - rate));
        for (size_t i = 0; i < dx.data.size(); ++i)
            dx.data[i] = cached_mask[i] ? dx.data[i] * scale : T(0);
        return dx;
    }
};

}  // namespace vsense
