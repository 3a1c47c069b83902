#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "vsense/errors.hpp"

namespace vsense {

/// Dense row-major tensor. The value buffer always matches the shape; the
/// gradient buffer is empty until alloc_grad() and then matches it too.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty unless allocated

    Tensor() = default;

    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), T(0));
    }

    Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<int64_t>(data.size()) != numel_of(shape)) {
            throw dimension_error("tensor data size " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str());
        }
    }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d < 0) throw dimension_error("negative dimension " + std::to_string(d));
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    void alloc_grad() { grad.assign(data.size(), T(0)); }
    bool has_grad() const { return !grad.empty(); }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
    }

    T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // 2-, 3- and 4-d row-major accessors.
    T& at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
    const T& at(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }
    T& at(int i, int j, int k) {
        return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    const T& at(int i, int j, int k) const {
        return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    T& at(int i, int j, int k, int l) {
        return data[((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    const T& at(int i, int j, int k, int l) const {
        return data[((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << "]";
        return os.str();
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

template <typename T>
inline void require_shape(const Tensor<T>& t, const std::vector<int>& want, const char* what) {
    if (t.shape != want) {
        Tensor<T> w(want);
        throw dimension_error(std::string(what) + ": expected shape " + w.shape_str() + ", got " +
                              t.shape_str());
    }
}

template <typename T>
inline void require_rank(const Tensor<T>& t, int rank, const char* what) {
    if (t.rank() != rank) {
        throw dimension_error(std::string(what) + ": expected rank " + std::to_string(rank) +
                              ", got shape " + t.shape_str());
    }
}

/// Layer-boundary guard: values entering a layer must be finite.
template <typename T>
inline void require_finite(const Tensor<T>& t, const char* what) {
    for (const T& v : t.data) {
        if (!std::isfinite(static_cast<double>(v))) {
            throw parameter_error(std::string(what) + ": non-finite value in tensor " +
                                  t.shape_str());
        }
    }
}

}  // namespace vsense
