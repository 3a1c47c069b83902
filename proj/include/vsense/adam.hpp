#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "vsense/layers.hpp"
#include "vsense/tensor.hpp"

namespace vsense {

/// Adam optimizer state over a fixed parameter list. Moment buffers are laid
/// out in the order the parameters were registered; the parameter list handed
/// to step() must match that order and those shapes.
template <typename T>
struct Adam {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t step_count = 0;
    std::vector<std::vector<T>> m, v;

    Adam() = default;
    explicit Adam(double lr_) : lr(lr_) {}

    void attach(const std::vector<ParamRef<T>>& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.tensor->data.size(), T(0));
            v.emplace_back(p.tensor->data.size(), T(0));
        }
        step_count = 0;
    }

    /// One update from the gradients currently accumulated in each param's
    /// grad buffer. Gradients are not cleared here.
    void step(const std::vector<ParamRef<T>>& params) {
        if (params.size() != m.size()) {
            throw dimension_error("Adam::step: " + std::to_string(params.size()) +
                                  " params vs state for " + std::to_string(m.size()));
        }
        ++step_count;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (size_t pi = 0; pi < params.size(); ++pi) {
            Tensor<T>& t = *params[pi].tensor;
            if (!t.has_grad()) {
                throw invariant_violation("Adam::step: param " + params[pi].name +
                                          " has no grad buffer");
            }
            if (t.data.size() != m[pi].size()) {
                throw dimension_error("Adam::step: param " + params[pi].name +
                                      " size changed since attach");
            }
            auto& mi = m[pi];
            auto& vi = v[pi];
            for (size_t i = 0; i < t.data.size(); ++i) {
                const double g = static_cast<double>(t.grad[i]);
                const double mn = beta1 * static_cast<double>(mi[i]) + (1.0 - beta1) * g;
                const double vn = beta2 * static_cast<double>(vi[i]) + (1.0 - beta2) * g * g;
                mi[i] = static_cast<T>(mn);
                vi[i] = static_cast<T>(vn);
                const double mh = mn / bc1;
                const double vh = vn / bc2;
                t.data[i] = static_cast<T>(static_cast<double>(t.data[i]) -
                                           lr * mh / (std::sqrt(vh) + eps));
            }
        }
    }
};

template <typename T>
inline void zero_grads(const std::vector<ParamRef<T>>& params) {
    for (const auto& p : params) p.tensor->zero_grad();
}

}  // namespace vsense
