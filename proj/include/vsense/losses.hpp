#pragma once

#include <cmath>
#include <cstdlib>

#include "vsense/tensor.hpp"

namespace vsense {

/// Mean squared error over all elements.
template <typename T>
double mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    if (!pred.same_shape(target)) {
        throw dimension_error("mse_loss: shape " + pred.shape_str() + " vs " + target.shape_str());
    }
    if (pred.numel() == 0) throw dimension_error("mse_loss: empty tensors");
    double acc = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(pred.numel());
}

/// d mse / d pred, scaled by `scale` (use 1/batch for a batch-mean loss whose
/// per-sample term is the per-sample MSE).
template <typename T>
Tensor<T> mse_loss_grad(const Tensor<T>& pred, const Tensor<T>& target, double scale) {
    if (!pred.same_shape(target)) {
        throw dimension_error("mse_loss_grad: shape " + pred.shape_str() + " vs " +
                              target.shape_str());
    }
    Tensor<T> g(pred.shape);
    const double k = 2.0 * scale / static_cast<double>(pred.numel());
    for (size_t i = 0; i < pred.data.size(); ++i) {
        g.data[i] = static_cast<T>(k * (static_cast<double>(pred.data[i]) -
                                        static_cast<double>(target.data[i])));
    }
    return g;
}

/// Binary cross entropy evaluated on the raw logit z with target y in {0,1}:
///   L = max(z,0) - z*y + log(1 + exp(-|z|))
/// which is exact and does not overflow for any finite z.
inline double bce_with_logit(double z, double y) {
    if (y != 0.0 && y != 1.0) {
        throw parameter_error("bce_with_logit: target must be 0 or 1");
    }
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

/// dL/dz = sigmoid(z) - y.
inline double bce_with_logit_grad(double z, double y) {
    return 1.0 / (1.0 + std::exp(-z)) - y;
}

}  // namespace vsense
