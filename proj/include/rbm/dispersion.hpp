#pragma once
// The dispersion-law family E(p) for a free relativistic particle and the
// operators built from it.
//
// In Compton units the exact law is E(p) = sqrt(1 + p^2); its binomial
// expansion E(p) = sum_j a_j p^{2j} has a_0 = 1, a_1 = 1/2, a_2 = -1/8, ...
// (the Taylor coefficients of sqrt(1+x) at x = p^2).  Truncating the sum
// at order N gives the weak-relativistic hierarchy: N = 1 is ordinary
// nonrelativistic quantum mechanics plus the rest-energy phase, N = 2 adds
// the first p^4 correction, and so on.  The series converges only for
// |p| <= 1, so truncated models flag evaluation beyond that radius.
//
// The free Hamiltonian acts on a periodic grid either
//   - spectrally: multiply each Fourier mode by E(k), or
//   - through the position-space kernel of sqrt(1 - d^2/dx^2), whose
//     off-origin values are K(x) = -K1(|x|)/(pi |x|) with K1 the Macdonald
//     (modified Bessel, second kind) function.  The two routes are
//     independent constructions of the same operator and are tested
//     against each other.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbm/fft.hpp"
#include "rbm/grid.hpp"

namespace rbm {

// Warnings that operations attach to their results (never thrown).
struct Diagnostics {
    std::vector<std::string> warnings;
    void warn(std::string msg) { warnings.push_back(std::move(msg)); }
    bool empty() const { return warnings.empty(); }
};

// ---------------------------------------------------------------------------
// Series coefficients
// ---------------------------------------------------------------------------

// a_j = binomial(1/2, j), the coefficient of x^j in sqrt(1+x).  Computed
// with an exact rational recurrence a_{j+1} = a_j * (1-2j) / (2j+2) in
// 128-bit integers (gcd-reduced each step), then converted to double.
inline double series_coefficient(int j) {
    if (j < 0) throw std::invalid_argument("series_coefficient: index must be >= 0");
    __int128 num = 1, den = 1;
    for (int m = 0; m < j; ++m) {
        num *= (1 - 2 * static_cast<__int128>(m));
        den *= (2 * static_cast<__int128>(m) + 2);
        // reduce; both factors are even-free soon enough that this keeps
        // magnitudes well inside 128 bits up to j ~ 60
        __int128 a = num < 0 ? -num : num, b = den;
        while (b != 0) { __int128 t = a % b; a = b; b = t; }
        if (a > 1) { num /= a; den /= a; }
    }
    if (j > 60) {
        // beyond exact-rational range fall back to the double recurrence
        double c = series_coefficient(60);
        for (int m = 60; m < j; ++m) c *= static_cast<double>(1 - 2 * m) / (2 * m + 2);
        return c;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

// ---------------------------------------------------------------------------
// DispersionModel
// ---------------------------------------------------------------------------

class DispersionModel {
  public:
    static DispersionModel exact() { return DispersionModel(0); }

    static DispersionModel truncated(int order) {
        if (order < 1) throw std::invalid_argument("DispersionModel: truncation order must be >= 1");
        return DispersionModel(order);
    }

    bool is_exact() const { return order_ == 0; }
    int order() const { return order_; }  // 0 means exact

    // coefficients a_0 .. a_N (empty for the exact model)
    const std::vector<double>& coefficients() const { return coeffs_; }

    bool operator==(const DispersionModel& o) const { return order_ == o.order_; }

    std::string name() const {
        return is_exact() ? std::string("exact") : "N:" + std::to_string(order_);
    }

  private:
    explicit DispersionModel(int order) : order_(order) {
        if (order_ > 0) {
            coeffs_.resize(order_ + 1);
            for (int j = 0; j <= order_; ++j) coeffs_[j] = series_coefficient(j);
        }
    }
    int order_;
    std::vector<double> coeffs_;
};

inline bool in_series_radius(double k) { return std::abs(k) <= 1.0; }

// ---------------------------------------------------------------------------
// Scalar maps: E(k) and v(p)
// ---------------------------------------------------------------------------

// E(k): sqrt(1+k^2) exactly, or the order-N partial sum.
inline double multiplier(double k, const DispersionModel& model) {
    if (!std::isfinite(k)) throw std::domain_error("multiplier: wavenumber must be finite");
    if (model.is_exact()) return std::hypot(1.0, k);
    const auto& a = model.coefficients();
    const double y = k * k;
    double s = a.back();
    for (int j = static_cast<int>(a.size()) - 2; j >= 0; --j) s = s * y + a[j];
    return s;
}

// v(p) = dE/dp evaluated at p = grad S.  Exact: p / sqrt(1+p^2), strictly
// inside the light cone.  Truncated: sum_{j>=1} 2j a_j p^{2j-1}; N = 1
// gives the identity map v = p.
inline double guidance_velocity(double p, const DispersionModel& model) {
    if (!std::isfinite(p)) throw std::domain_error("guidance_velocity: momentum must be finite");
    if (model.is_exact()) return p / std::hypot(1.0, p);
    const auto& a = model.coefficients();
    const double y = p * p;
    const int n = model.order();
    double s = 2.0 * n * a[n];
    for (int j = n - 1; j >= 1; --j) s = s * y + 2.0 * j * a[j];
    return s * p;
}

// dv/dp = d^2E/dp^2; used to transport log-densities along trajectories.
inline double guidance_slope(double p, const DispersionModel& model) {
    if (!std::isfinite(p)) throw std::domain_error("guidance_slope: momentum must be finite");
    if (model.is_exact()) {
        const double h = std::hypot(1.0, p);
        return 1.0 / (h * h * h);
    }
    const auto& a = model.coefficients();
    const double y = p * p;
    double s = 0.0;
    for (int j = model.order(); j >= 1; --j) s = s * y + 2.0 * j * (2.0 * j - 1.0) * a[j];
    return s;
}

// ---------------------------------------------------------------------------
// Macdonald function K1 and the position-space kernel
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double euler_gamma = 0.57721566490153286060651209008;

// Ascending series, z <= 8:
//   K1(z) = 1/z + ln(z/2) I1(z) - (z/4) sum_m [psi(m+1)+psi(m+2)] u_m,
//   u_m = (z^2/4)^m / (m! (m+1)!),  I1(z) = (z/2) sum_m u_m.
// For z > 8 the asymptotic expansion truncated near its smallest term
// reaches ~1e-11 absolute error; the series would lose digits to
// cancellation there instead.
inline double k1_series(double z) {
    const double q = 0.25 * z * z;
    double u = 1.0;             // u_0
    double h1 = 0.0, h2 = 1.0;  // harmonic numbers H_m, H_{m+1}
    double i1 = 0.0, s2 = 0.0;
    for (int m = 0; m < 64; ++m) {
        i1 += u;
        s2 += (2.0 * (h1 - euler_gamma) + (h2 - h1)) * u;  // psi(m+1)+psi(m+2)
        const double next = u * q / ((m + 1.0) * (m + 2.0));
        if (next < 1e-20 * (std::abs(i1) + 1.0)) break;
        u = next;
        h1 = h2;
        h2 += 1.0 / (m + 2.0);
    }
    i1 *= 0.5 * z;
    return 1.0 / z + std::log(0.5 * z) * i1 - 0.25 * z * s2;
}

inline double k1_asymptotic(double z) {
    // K1(z) ~ sqrt(pi/(2z)) e^{-z} sum_k a_k / z^k, a_k = a_{k-1} (4-(2k-1)^2)/(8k)
    double term = 1.0, sum = 1.0, prev = 1.0;
    const int kmax = std::min(40, static_cast<int>(2.0 * z));
    for (int k = 1; k <= kmax; ++k) {
        term *= (4.0 - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * z);
        if (std::abs(term) > std::abs(prev)) break;  // past the smallest term
        sum += term;
        prev = term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return std::sqrt(std::numbers::pi / (2.0 * z)) * std::exp(-z) * sum;
}

}  // namespace detail

// Modified Bessel function of the second kind, order 1, z > 0.
inline double macdonald_k1(double z) {
    if (!(z > 0.0)) throw std::domain_error("macdonald_k1: argument must be positive");
    return z <= 8.0 ? detail::k1_series(z) : detail::k1_asymptotic(z);
}

// Position-space kernel of the exact dispersion operator away from the
// origin: K(x) = -K1(|x|)/(pi |x|).  Even in x, ~ -1/(pi x^2) as x -> 0,
// exponentially small for |x| >> 1.  The origin itself carries the
// distributional (identity + UV) content and is handled by the discrete
// operator, not by this function.
inline double kernel_value(double x) {
    if (x == 0.0) throw std::domain_error("kernel_value: kernel is distributional at x = 0");
    const double ax = std::abs(x);
    return -macdonald_k1(ax) / (std::numbers::pi * ax);
}

namespace detail {

// Massive part of the kernel: G(y) = K(y) + 1/(pi y^2) for y > 0.  Its
// Fourier pairing gives sqrt(1+k^2) - 1 - |k|, i.e. everything in the
// dispersion beyond the rest energy and the massless UV part.  Near the
// origin G has only a log singularity, so it is evaluated by the same
// ascending series as K1 with the 1/z^2 term removed analytically:
//   G(y) = -(1/pi) [ ln(y/2) I1(y)/y - (1/4) sum_m [psi(m+1)+psi(m+2)] u_m ]
inline double kernel_massive_part(double y) {
    if (y <= 8.0) {
        const double q = 0.25 * y * y;
        double u = 1.0, h1 = 0.0, h2 = 1.0, i1y = 0.0, s2 = 0.0;
        for (int m = 0; m < 64; ++m) {
            i1y += u;
            s2 += (2.0 * (h1 - euler_gamma) + (h2 - h1)) * u;
            const double next = u * q / ((m + 1.0) * (m + 2.0));
            if (next < 1e-20 * (std::abs(i1y) + 1.0)) break;
            u = next;
            h1 = h2;
            h2 += 1.0 / (m + 2.0);
        }
        i1y *= 0.5;  // I1(y)/y
        return -(std::log(0.5 * y) * i1y - 0.25 * s2) / std::numbers::pi;
    }
    return -macdonald_k1(y) / (std::numbers::pi * y) + 1.0 / (std::numbers::pi * y * y);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Discrete Hamiltonian application
// ---------------------------------------------------------------------------

enum class ApplyMethod { Spectral, Kernel };

// Discrete symbol of the kernel-route operator on a given grid.  The
// operator is assembled from three pieces, none of which uses E(k):
//   1. the rest-energy identity (the self-bin closure: the symbol is
//      pinned to exactly 1 at k = 0),
//   2. the massless UV part, whose action on the dual lattice is the
//      elementary multiplier |k|,
//   3. a periodic convolution with dx * G_per(x_d), where G_per is the
//      periodization of the massive kernel part.  K images beyond the
//      nearest are below e^{-L}; the slowly decaying 1/(pi y^2) images are
//      summed in closed form via (pi/L)^2 / sin^2(pi y / L).
// Measured accuracy of the symbol against sqrt(1+k^2) is ~0.005 k^2 dx^3.
inline std::vector<double> kernel_route_symbol(const SpectralGrid& grid) {
    const int n = grid.point_count;
    const double L = grid.domain_length;
    const double dx = grid.spacing();
    const double pi = std::numbers::pi;

    std::vector<std::complex<double>> w(n, 0.0);
    double wsum = 0.0;
    for (int d = 1; d < n; ++d) {
        const double x = d * dx;
        const double s = std::sin(pi * x / L);
        const double image_tail = (pi / L) * (pi / L) / (s * s) - 1.0 / (x * x) -
                                  1.0 / ((L - x) * (L - x));
        const double g_per = detail::kernel_massive_part(x) + detail::kernel_massive_part(L - x) +
                             image_tail / pi;
        w[d] = dx * g_per;
        wsum += dx * g_per;
    }
    fft_forward(w);

    std::vector<double> symbol(n);
    for (int j = 0; j < n; ++j) {
        const double kabs = std::abs(grid.wavenumbers[j]);
        symbol[j] = 1.0 + kabs + (w[j].real() - wsum);
    }
    return symbol;
}

// Apply the free Hamiltonian to a grid-sampled field.
inline std::vector<std::complex<double>> apply_hamiltonian(
    const std::vector<std::complex<double>>& field, const SpectralGrid& grid,
    const DispersionModel& model, ApplyMethod method = ApplyMethod::Spectral,
    Diagnostics* diag = nullptr) {
    if (static_cast<int>(field.size()) != grid.point_count)
        throw std::invalid_argument("apply_hamiltonian: field length does not match grid");
    if (method == ApplyMethod::Kernel && !model.is_exact())
        throw std::invalid_argument("apply_hamiltonian: kernel method is defined for the exact model only");

    if (!model.is_exact() && diag && grid.nyquist() > 1.0)
        diag->warn("truncated dispersion evaluated beyond its convergence radius |k| <= 1 "
                   "(grid Nyquist = " + std::to_string(grid.nyquist()) + ")");

    std::vector<std::complex<double>> out = field;
    fft_forward(out);
    if (method == ApplyMethod::Spectral) {
        for (int j = 0; j < grid.point_count; ++j) out[j] *= multiplier(grid.wavenumbers[j], model);
    } else {
        const std::vector<double> symbol = kernel_route_symbol(grid);
        for (int j = 0; j < grid.point_count; ++j) out[j] *= symbol[j];
    }
    fft_inverse(out);
    return out;
}

}  // namespace rbm
