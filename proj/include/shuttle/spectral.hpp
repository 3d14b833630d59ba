#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace shuttle::spectral {

using cvec = std::vector<std::complex<double>>;

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n)
        p <<= 1;
    return p;
}

inline cvec forward(const cvec& in) {
    Eigen::FFT<double> fft;
    cvec out;
    fft.fwd(out, in);
    return out;
}

/// Inverse transform including the 1/N normalisation.
inline cvec inverse(const cvec& in) {
    Eigen::FFT<double> fft;
    cvec out;
    fft.inv(out, in);
    return out;
}

/// Absolute frequency of bin k for a length-n transform with spacing dt (units 1/dt).
inline double bin_frequency(std::size_t k, std::size_t n, double dt) {
    std::size_t m = k <= n / 2 ? k : n - k;
    return static_cast<double>(m) / (static_cast<double>(n) * dt);
}

} // namespace shuttle::spectral
