#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "vsense/errors.hpp"
#include "vsense/tensor.hpp"

namespace vsense {

template <typename T>
inline double rms(const T* x, int64_t n) {
    if (n <= 0) throw parameter_error("rms: empty signal");
    double acc = 0;
    for (int64_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]) * static_cast<double>(x[i]);
    return std::sqrt(acc / static_cast<double>(n));
}

template <typename T>
inline double rms(const std::vector<T>& x) {
    return rms(x.data(), static_cast<int64_t>(x.size()));
}

/// |rfft(x)| for a real signal, n/2+1 bins, rectangular window. Plans with
/// FFTW_ESTIMATE so the transform is reproducible across runs.
inline std::vector<double> magnitude_spectrum(const double* x, int n) {
    if (n < 2) throw parameter_error("magnitude_spectrum: signal too short");
    const int nb = n / 2 + 1;
    double* in = fftw_alloc_real(static_cast<size_t>(n));
    fftw_complex* out = fftw_alloc_complex(static_cast<size_t>(nb));
    std::copy(x, x + n, in);
    fftw_plan plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    fftw_execute(plan);
    std::vector<double> mag(static_cast<size_t>(nb));
    for (int k = 0; k < nb; ++k)
        mag[static_cast<size_t>(k)] = std::hypot(out[k][0], out[k][1]);
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
    return mag;
}

struct SpectrumPeak {
    double freq = 0;    // Hz of the strongest bin in the searched band
    double ratio = 0;   // peak magnitude / median magnitude over the band
};

/// Dominant-peak analysis of a multichannel series (C, n): magnitude spectra
/// are averaged over channels, then searched within [f_lo, f_hi]. The default
/// band covers the populated support of both signal classes; pushing f_hi
/// past the stable generator's 500 Hz brickwall would divide the peak ratio
/// by empty bins.
template <typename T>
inline SpectrumPeak dominant_frequency(const Tensor<T>& series, int sample_rate,
                                       double f_lo = 50.0, double f_hi = 500.0) {
    require_rank(series, 2, "dominant_frequency series");
    const int C = series.dim(0), n = series.dim(1);
    if (C < 1 || n < 1024) {
        throw parameter_error("dominant_frequency: need at least 1024 samples, got " +
                              std::to_string(n));
    }
    std::vector<double> buf(static_cast<size_t>(n));
    std::vector<double> avg;
    for (int c = 0; c < C; ++c) {
        for (int i = 0; i < n; ++i) buf[static_cast<size_t>(i)] = static_cast<double>(series.at(c, i));
        auto mag = magnitude_spectrum(buf.data(), n);
        if (avg.empty()) avg.assign(mag.size(), 0.0);
        for (size_t k = 0; k < mag.size(); ++k) avg[k] += mag[k] / C;
    }
    const double hz_per_bin = static_cast<double>(sample_rate) / n;
    const int k_lo = std::max(1, static_cast<int>(std::ceil(f_lo / hz_per_bin)));
    const int k_hi = std::min(static_cast<int>(avg.size()) - 1,
                              static_cast<int>(std::floor(f_hi / hz_per_bin)));
    if (k_lo > k_hi) throw parameter_error("dominant_frequency: band holds no bins");

    int k_peak = k_lo;
    for (int k = k_lo + 1; k <= k_hi; ++k)
        if (avg[static_cast<size_t>(k)] > avg[static_cast<size_t>(k_peak)]) k_peak = k;

    std::vector<double> band(avg.begin() + k_lo, avg.begin() + k_hi + 1);
    std::nth_element(band.begin(), band.begin() + band.size() / 2, band.end());
    const double median = band[band.size() / 2];

    SpectrumPeak p;
    p.freq = k_peak * hz_per_bin;
    const double peak = avg[static_cast<size_t>(k_peak)];
    if (median > 0)
        p.ratio = peak / median;
    else
        p.ratio = peak > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    return p;
}

/// Band-limit white noise by zeroing all rfft bins above cutoff_hz (and the
/// DC bin), returning a zero-mean signal of the same length.
inline std::vector<double> lowpass_fft(const std::vector<double>& x, int sample_rate,
                                       double cutoff_hz) {
    const int n = static_cast<int>(x.size());
    if (n < 2) throw parameter_error("lowpass_fft: signal too short");
    const int nb = n / 2 + 1;
    double* in = fftw_alloc_real(static_cast<size_t>(n));
    fftw_complex* spec = fftw_alloc_complex(static_cast<size_t>(nb));
    std::copy(x.begin(), x.end(), in);
    fftw_plan fwd = fftw_plan_dft_r2c_1d(n, in, spec, FFTW_ESTIMATE);
    fftw_execute(fwd);
    const double hz_per_bin = static_cast<double>(sample_rate) / n;
    spec[0][0] = spec[0][1] = 0.0;  // exact zero mean
    for (int k = 1; k < nb; ++k) {
        if (k * hz_per_bin > cutoff_hz) spec[k][0] = spec[k][1] = 0.0;
    }
    fftw_plan bwd = fftw_plan_dft_c2r_1d(n, spec, in, FFTW_ESTIMATE);
    fftw_execute(bwd);
    std::vector<double> y(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) y[static_cast<size_t>(i)] = in[i] / n;
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_free(in);
    fftw_free(spec);
    return y;
}

}  // namespace vsense
