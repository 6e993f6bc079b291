#pragma once
// Iterative radix-2 complex FFT, power-of-two lengths only.
//
// Forward transform uses the e^{-ikx} convention and no scaling; the
// inverse applies 1/N.  Twiddles are generated directly from std::polar
// per call, which keeps results bit-reproducible across runs and
// platforms with the same libm.

#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace rbm {

namespace detail {

inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fft: length must be a power of two");

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    const double sign = inverse ? 1.0 : -1.0;
    std::vector<std::complex<double>> w(n / 2);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        const std::size_t half = len >> 1;
        for (std::size_t j = 0; j < half; ++j) w[j] = std::polar(1.0, ang * static_cast<double>(j));
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t j = 0; j < half; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + half] * w[j];
                a[i + j] = u + v;
                a[i + j + half] = u - v;
            }
        }
    }

    if (inverse) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (auto& x : a) x *= inv_n;
    }
}

}  // namespace detail

inline void fft_forward(std::vector<std::complex<double>>& a) { detail::fft_radix2(a, false); }
inline void fft_inverse(std::vector<std::complex<double>>& a) { detail::fft_radix2(a, true); }

inline std::vector<std::complex<double>> fft_of(std::vector<std::complex<double>> a) {
    fft_forward(a);
    return a;
}

inline std::vector<std::complex<double>> ifft_of(std::vector<std::complex<double>> a) {
    fft_inverse(a);
    return a;
}

}  // namespace rbm
