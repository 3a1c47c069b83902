#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <tuple>
#include <vector>

#include "vsense/layers.hpp"
#include "vsense/tensor.hpp"

namespace vsense {

/// Single LSTM layer over full sequences. Gate order in the stacked weight
/// matrices is (input, forget, cell, output); the cell update is
///   c_t = f * c_{t-1} + i * g,  h_t = o * tanh(c_t)
/// with sigmoid on i,f,o and tanh on g. All steps in a batch advance in
/// lockstep so each gate preactivation is one GEMM per step.
template <typename T>
struct Lstm {
    int in, hidden;
    Tensor<T> wx;  // (4H, in)
    Tensor<T> wh;  // (4H, hidden)
    Tensor<T> b;   // (4H)

    // Caches from forward(train=true): x, gates per step, cell states per
    // step, hidden states per step. Layouts: gates (Tsteps, B, 4H),
    // cells/hiddens (Tsteps, B, H).
    Tensor<T> cached_x;
    std::vector<T> cached_gates, cached_cells, cached_hiddens;

    Lstm(int in_, int hidden_)
        : in(in_), hidden(hidden_), wx({4 * hidden_, in_}), wh({4 * hidden_, hidden_}),
          b({4 * hidden_}) {
        wx.alloc_grad();
        wh.alloc_grad();
        b.alloc_grad();
    }

    void init(Rng& rng) {
        init_uniform(wx, in, rng);
        init_uniform(wh, hidden, rng);
        init_uniform(b, hidden, rng);
    }
    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({&wx, prefix + ".wx"});
        out.push_back({&wh, prefix + ".wh"});
        out.push_back({&b, prefix + ".b"});
    }

    // x: (B, Tsteps, in) -> hidden sequence (B, Tsteps, hidden); h_0 = c_0 = 0.
    Tensor<T> forward(const Tensor<T>& x, bool train) {
        require_rank(x, 3, "Lstm input");
        require_finite(x, "Lstm input");
        if (x.dim(2) != in) {
            throw dimension_error("Lstm: feature axis " + std::to_string(x.dim(2)) + " != " +
                                  std::to_string(in));
        }
        if (x.dim(1) == 0) throw parameter_error("Lstm: empty sequence");
        const int B = x.dim(0), steps = x.dim(1);
        const int H = hidden, G = 4 * H;
        Tensor<T> hseq({B, steps, H});

        MatRM<T> z(B, G);
        MatRM<T> h = MatRM<T>::Zero(B, H);
        MatRM<T> c = MatRM<T>::Zero(B, H);
        MapCM<T> wxm(wx.data.data(), G, in);
        MapCM<T> whm(wh.data.data(), G, H);

        if (train) {
            cached_x = x;
            cached_gates.assign(static_cast<size_t>(steps) * B * G, T(0));
            cached_cells.assign(static_cast<size_t>(steps) * B * H, T(0));
            cached_hiddens.assign(static_cast<size_t>(steps) * B * H, T(0));
        }

        for (int t = 0; t < steps; ++t) {
            Eigen::Map<const MatRM<T>, 0, Eigen::OuterStride<>> xt(
                x.data.data() + static_cast<int64_t>(t) * in, B, in,
                Eigen::OuterStride<>(static_cast<Eigen::Index>(steps) * in));
            z.noalias() = xt * wxm.transpose();
            z.noalias() += h * whm.transpose();
            for (int n = 0; n < B; ++n)
                for (int j = 0; j < G; ++j) z(n, j) += b.data[static_cast<size_t>(j)];

            for (int n = 0; n < B; ++n) {
                for (int j = 0; j < H; ++j) {
                    const T i_g = sigmoid_scalar(z(n, j));
                    const T f_g = sigmoid_scalar(z(n, H + j));
                    const T g_g = std::tanh(z(n, 2 * H + j));
                    const T o_g = sigmoid_scalar(z(n, 3 * H + j));
                    const T c_new = f_g * c(n, j) + i_g * g_g;
                    c(n, j) = c_new;
                    h(n, j) = o_g * std::tanh(c_new);
                    if (train) {
                        T* gp = cached_gates.data() + (static_cast<size_t>(t) * B + n) * G;
                        gp[j] = i_g;
                        gp[H + j] = f_g;
                        gp[2 * H + j] = g_g;
                        gp[3 * H + j] = o_g;
                    }
                }
                if (train) {
                    T* cp = cached_cells.data() + (static_cast<size_t>(t) * B + n) * H;
                    T* hp = cached_hiddens.data() + (static_cast<size_t>(t) * B + n) * H;
                    for (int j = 0; j < H; ++j) {
                        cp[j] = c(n, j);
                        hp[j] = h(n, j);
                    }
                }
                for (int j = 0; j < H; ++j) hseq.at(n, t, j) = h(n, j);
            }
        }
        return hseq;
    }

    // d_hseq: gradient on the full hidden sequence (B, Tsteps, hidden); pass
    // zeros everywhere except the positions actually consumed downstream.
    Tensor<T> backward(const Tensor<T>& d_hseq) {
        const Tensor<T>& x = cached_x;
        const int B = x.dim(0), steps = x.dim(1);
        const int H = hidden, G = 4 * H;
        Tensor<T> dx(x.shape);

        MatRM<T> dh = MatRM<T>::Zero(B, H);
        MatRM<T> dc = MatRM<T>::Zero(B, H);
        MatRM<T> dz(B, G);
        MapCM<T> wxm(wx.data.data(), G, in);
        MapCM<T> whm(wh.data.data(), G, H);
        MapM<T> dwxm(wx.grad.data(), G, in);
        MapM<T> dwhm(wh.grad.data(), G, H);

        for (int t = steps - 1; t >= 0; --t) {
            for (int n = 0; n < B; ++n)
                for (int j = 0; j < H; ++j) dh(n, j) += d_hseq.at(n, t, j);

            for (int n = 0; n < B; ++n) {
                const T* gp = cached_gates.data() + (static_cast<size_t>(t) * B + n) * G;
                const T* cp = cached_cells.data() + (static_cast<size_t>(t) * B + n) * H;
                const T* cprev =
                    t > 0 ? cached_cells.data() + (static_cast<size_t>(t - 1) * B + n) * H
                          : nullptr;
                for (int j = 0; j < H; ++j) {
                    const T i_g = gp[j], f_g = gp[H + j], g_g = gp[2 * H + j], o_g = gp[3 * H + j];
                    const T tc = std::tanh(cp[j]);
                    const T dc_t = dc(n, j) + dh(n, j) * o_g * (T(1) - tc * tc);
                    const T do_g = dh(n, j) * tc;
                    const T di_g = dc_t * g_g;
                    const T df_g = dc_t * (cprev ? cprev[j] : T(0));
                    const T dg_g = dc_t * i_g;
                    dz(n, j) = di_g * i_g * (T(1) - i_g);
                    dz(n, H + j) = df_g * f_g * (T(1) - f_g);
                    dz(n, 2 * H + j) = dg_g * (T(1) - g_g * g_g);
                    dz(n, 3 * H + j) = do_g * o_g * (T(1) - o_g);
                    dc(n, j) = dc_t * f_g;
                }
            }

            Eigen::Map<const MatRM<T>, 0, Eigen::OuterStride<>> xt(
                x.data.data() + static_cast<int64_t>(t) * in, B, in,
                Eigen::OuterStride<>(static_cast<Eigen::Index>(steps) * in));
            dwxm.noalias() += dz.transpose() * xt;
            if (t > 0) {
                Eigen::Map<const MatRM<T>> hprev(
                    cached_hiddens.data() + static_cast<size_t>(t - 1) * B * H, B, H);
                dwhm.noalias() += dz.transpose() * hprev;
            }
            for (int n = 0; n < B; ++n)
                for (int j = 0; j < G; ++j) b.grad[static_cast<size_t>(j)] += dz(n, j);

            Eigen::Map<MatRM<T>, 0, Eigen::OuterStride<>> dxt(
                dx.data.data() + static_cast<int64_t>(t) * in, B, in,
                Eigen::OuterStride<>(static_cast<Eigen::Index>(steps) * in));
            dxt.noalias() = dz * wxm;
            dh.noalias() = dz * whm;
        }
        return dx;
    }
};

/// Functional single-sequence form: inputs (Tsteps, in), explicit initial
/// state. Returns (hidden sequence (Tsteps, H), final hidden, final cell).
template <typename T>
std::tuple<Tensor<T>, Tensor<T>, Tensor<T>> lstm_layer(const Tensor<T>& inputs,
                                                       const Tensor<T>& wx, const Tensor<T>& wh,
                                                       const Tensor<T>& b, const Tensor<T>& h0,
                                                       const Tensor<T>& c0) {
    require_rank(inputs, 2, "lstm_layer inputs");
    require_rank(wx, 2, "lstm_layer wx");
    const int G = wx.dim(0), in = wx.dim(1);
    if (G % 4 != 0) throw dimension_error("lstm_layer: stacked gate axis must be 4*hidden");
    const int H = G / 4;
    require_shape(wh, {G, H}, "lstm_layer wh");
    require_shape(b, {G}, "lstm_layer bias");
    require_shape(h0, {H}, "lstm_layer initial hidden");
    require_shape(c0, {H}, "lstm_layer initial cell");
    if (inputs.dim(1) != in) {
        throw dimension_error("lstm_layer: input feature axis " + std::to_string(inputs.dim(1)) +
                              " != " + std::to_string(in));
    }
    if (inputs.dim(0) == 0) throw parameter_error("lstm_layer: empty sequence");
    const int steps = inputs.dim(0);
    Tensor<T> hseq({steps, H});
    Tensor<T> h = h0, c = c0;
    std::vector<T> z(static_cast<size_t>(G));
    for (int t = 0; t < steps; ++t) {
        for (int j = 0; j < G; ++j) {
            T acc = b.data[static_cast<size_t>(j)];
            for (int d = 0; d < in; ++d) acc += wx.at(j, d) * inputs.at(t, d);
            for (int d = 0; d < H; ++d) acc += wh.at(j, d) * h.data[static_cast<size_t>(d)];
            z[static_cast<size_t>(j)] = acc;
        }
        for (int j = 0; j < H; ++j) {
            const T i_g = sigmoid_scalar(z[static_cast<size_t>(j)]);
            const T f_g = sigmoid_scalar(z[static_cast<size_t>(H + j)]);
            const T g_g = std::tanh(z[static_cast<size_t>(2 * H + j)]);
            const T o_g = sigmoid_scalar(z[static_cast<size_t>(3 * H + j)]);
            c.data[static_cast<size_t>(j)] = f_g * c.data[static_cast<size_t>(j)] + i_g * g_g;
            h.data[static_cast<size_t>(j)] = o_g * std::tanh(c.data[static_cast<size_t>(j)]);
            hseq.at(t, j) = h.data[static_cast<size_t>(j)];
        }
    }
    return {std::move(hseq), std::move(h), std::move(c)};
}

}  // namespace vsense
