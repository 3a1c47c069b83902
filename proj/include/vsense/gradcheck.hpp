#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "vsense/tensor.hpp"

namespace vsense {

/// Central-difference gradient verification in double precision.
///
/// `f` re-evaluates the scalar output from the current contents of the
/// checked buffers; `elems` points at every scalar the analytic gradient
/// covers; `analytic[i]` is the claimed d f / d *elems[i]. Returns the worst
/// relative error max(|a-n| / max(|a|,|n|,1)).
inline double gradcheck_max_rel_error(const std::function<double()>& f,
                                      const std::vector<double*>& elems,
                                      const std::vector<double>& analytic, double eps = 1e-5) {
    if (elems.size() != analytic.size()) {
        throw dimension_error("gradcheck: " + std::to_string(elems.size()) + " elements vs " +
                              std::to_string(analytic.size()) + " analytic entries");
    }
    double worst = 0.0;
    for (size_t i = 0; i < elems.size(); ++i) {
        double* p = elems[i];
        const double orig = *p;
        *p = orig + eps;
        const double up = f();
        *p = orig - eps;
        const double down = f();
        *p = orig;
        const double numeric = (up - down) / (2.0 * eps);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1.0});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

/// Collect raw element pointers of a tensor for gradcheck.
inline std::vector<double*> elem_ptrs(Tensor<double>& t) {
    std::vector<double*> out;
    out.reserve(t.data.size());
    for (auto& v : t.data) out.push_back(&v);
    return out;
}

}  // namespace vsense
